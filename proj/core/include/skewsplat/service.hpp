#pragma once

#include <skewsplat/camera.hpp>
#include <skewsplat/raster.hpp>
#include <skewsplat/scene.hpp>

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace skewsplat::service {

/// Parsed client request. Wire form (one JSON text message):
/// {"frame_id": u32, "c2w": [16 numbers, row-major], "convention": "opengl"|"opencv",
///  "fov_x": radians, "width": int, "height": int}
struct RenderRequest {
    std::uint32_t frame_id = 0;
    CameraView view;
};

struct ServiceConfig {
    int max_width = 4096;
    int max_height = 4096;
    /// Payload after the header is a PNG instead of raw RGB8.
    bool png_frames = false;
    RenderConfig render;
};

/// Request rejected before rendering. `code` is "bad_request" or "too_large".
struct RequestError {
    std::string code;
    std::string message;
    std::optional<std::uint32_t> frame_id;
};

/// Returns the request or the error response to send back.
struct ParseResult {
    std::optional<RenderRequest> request;
    std::optional<RequestError> error;
};
ParseResult parse_request(std::string_view text, const ServiceConfig& cfg);

/// JSON text for a request (used by clients and tests).
std::string request_json(const RenderRequest& req);

/// {"frame_id": id|null, "error": {"code": ..., "message": ...}}
std::string error_json(const RequestError& err);

inline constexpr std::size_t kFrameHeaderBytes = 8;

struct FrameHeader {
    std::uint32_t frame_id = 0;
    std::uint16_t width = 0;
    std::uint16_t height = 0;
};

/// 8-byte little-endian header followed by `payload`.
std::vector<std::uint8_t> encode_frame(const FrameHeader& h, std::span<const std::uint8_t> payload);

/// Splits a binary message; throws Error(TruncatedPayload) if shorter than the header.
FrameHeader decode_frame_header(std::span<const std::uint8_t> message);

/// The binary message the service sends for `req`.
std::vector<std::uint8_t> render_frame_message(const Scene& scene, const RenderRequest& req, const ServiceConfig& cfg);

/// WebSocket render server. Each connection has a depth-1 latest-wins slot;
/// one worker thread renders for all connections. GET /health answers
/// {"n_primitives": n, "sh_degree": d}.
class Server {
public:
    Server(Scene scene, ServiceConfig cfg);
    ~Server();
    Server(const Server&) = delete;
    Server& operator=(const Server&) = delete;

    /// Binds and starts the io and render threads; returns the bound port
    /// (pass port 0 for an ephemeral one).
    std::uint16_t start(const std::string& address, std::uint16_t port);
    /// Blocks until stop() is called from another thread or a signal handler.
    void wait();
    void stop();

    std::uint64_t frames_rendered() const noexcept;
    std::uint64_t requests_superseded() const noexcept;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

/// Blocking WebSocket client for tests and tools.
class Client {
public:
    struct Message {
        bool binary = false;
        std::string data;
    };

    Client();
    ~Client();
    Client(const Client&) = delete;
    Client& operator=(const Client&) = delete;

    void connect(const std::string& host, std::uint16_t port);
    void send_text(const std::string& text);
    void send_binary(std::span<const std::uint8_t> bytes);
    Message receive();
    void close();

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

/// Plain HTTP GET; returns the response body. Throws Error(Io) on failure.
std::string http_get(const std::string& host, std::uint16_t port, const std::string& target);

}  // namespace skewsplat::service
