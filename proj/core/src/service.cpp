#include <skewsplat/image.hpp>
#include <skewsplat/service.hpp>

#include <boost/asio.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/http.hpp>
#include <boost/beast/websocket.hpp>
#include <json.hpp>

#include <atomic>
#include <condition_variable>
#include <csignal>
#include <deque>
#include <limits>
#include <mutex>
#include <thread>
#include <variant>

namespace skewsplat::service {

namespace net = boost::asio;
namespace beast = boost::beast;
namespace http = beast::http;
namespace websocket = beast::websocket;
using tcp = net::ip::tcp;
using nlohmann::json;

// ---------------------------------------------------------------------------
// Protocol

ParseResult parse_request(std::string_view text, const ServiceConfig& cfg) {
    ParseResult out;
    auto fail = [&](const char* code, std::string msg) {
        out.error = RequestError{code, std::move(msg), {}};
        return out;
    };

    json j = json::parse(text, nullptr, false);
    if (j.is_discarded()) return fail("bad_request", "request is not valid JSON");
    if (!j.is_object()) return fail("bad_request", "request must be a JSON object");

    std::optional<std::uint32_t> id;
    if (j.contains("frame_id") && j["frame_id"].is_number_integer()) {
        const auto v = j["frame_id"].get<std::int64_t>();
        if (v >= 0 && v <= std::numeric_limits<std::uint32_t>::max()) id = static_cast<std::uint32_t>(v);
    }
    auto fail_id = [&](const char* code, std::string msg) {
        out.error = RequestError{code, std::move(msg), id};
        return out;
    };
    if (!id) return fail_id("bad_request", "'frame_id' must be an integer in [0, 2^32)");

    RenderRequest req;
    req.frame_id = *id;
    const json* m = j.contains("c2w") ? &j["c2w"] : nullptr;
    if (!m || !m->is_array() || m->size() != 16) return fail_id("bad_request", "'c2w' must be an array of 16 numbers");
    for (int k = 0; k < 16; ++k) {
        if (!(*m)[k].is_number()) return fail_id("bad_request", "'c2w' must be an array of 16 numbers");
        req.view.c2w(k / 4, k % 4) = (*m)[k].get<double>();
    }
    if (!j.contains("convention") || !j["convention"].is_string())
        return fail_id("bad_request", "'convention' must be \"opengl\" or \"opencv\"");
    const auto conv = parse_convention(j["convention"].get<std::string>());
    if (!conv) return fail_id("bad_request", "'convention' must be \"opengl\" or \"opencv\"");
    req.view.convention = *conv;
    if (!j.contains("fov_x") || !j["fov_x"].is_number()) return fail_id("bad_request", "'fov_x' must be a number");
    req.view.fov_x = j["fov_x"].get<double>();
    for (const char* key : {"width", "height"})
        if (!j.contains(key) || !j[key].is_number_integer())
            return fail_id("bad_request", std::string("'") + key + "' must be an integer");
    const auto w = j["width"].get<std::int64_t>(), h = j["height"].get<std::int64_t>();
    if (w < 1 || h < 1) return fail_id("bad_request", "'width' and 'height' must be >= 1");
    if (w > cfg.max_width || h > cfg.max_height || w > 65535 || h > 65535)
        return fail_id("too_large", std::to_string(w) + "x" + std::to_string(h) + " exceeds the " +
                                        std::to_string(cfg.max_width) + "x" + std::to_string(cfg.max_height) + " cap");
    req.view.width = static_cast<int>(w);
    req.view.height = static_cast<int>(h);
    try {
        validate(req.view);
    } catch (const Error& e) {
        return fail_id("bad_request", e.what());
    }
    out.request = req;
    return out;
}

std::string request_json(const RenderRequest& req) {
    json m = json::array();
    for (int k = 0; k < 16; ++k) m.push_back(req.view.c2w(k / 4, k % 4));
    return json{{"frame_id", req.frame_id},
                {"c2w", m},
                {"convention", std::string(to_string(req.view.convention))},
                {"fov_x", req.view.fov_x},
                {"width", req.view.width},
                {"height", req.view.height}}
        .dump();
}

std::string error_json(const RequestError& err) {
    json j;
    j["frame_id"] = err.frame_id ? json(*err.frame_id) : json(nullptr);
    j["error"] = {{"code", err.code}, {"message", err.message}};
    return j.dump();
}

std::vector<std::uint8_t> encode_frame(const FrameHeader& h, std::span<const std::uint8_t> payload) {
    std::vector<std::uint8_t> out(kFrameHeaderBytes + payload.size());
    for (int k = 0; k < 4; ++k) out[k] = static_cast<std::uint8_t>(h.frame_id >> (8 * k));
    out[4] = static_cast<std::uint8_t>(h.width);
    out[5] = static_cast<std::uint8_t>(h.width >> 8);
    out[6] = static_cast<std::uint8_t>(h.height);
    out[7] = static_cast<std::uint8_t>(h.height >> 8);
    std::copy(payload.begin(), payload.end(), out.begin() + kFrameHeaderBytes);
    return out;
}

FrameHeader decode_frame_header(std::span<const std::uint8_t> message) {
    if (message.size() < kFrameHeaderBytes)
        throw Error(ErrorCode::TruncatedPayload,
                    "frame message has " + std::to_string(message.size()) + " bytes, header needs 8", "header");
    FrameHeader h;
    for (int k = 0; k < 4; ++k) h.frame_id |= static_cast<std::uint32_t>(message[k]) << (8 * k);
    h.width = static_cast<std::uint16_t>(message[4] | (message[5] << 8));
    h.height = static_cast<std::uint16_t>(message[6] | (message[7] << 8));
    return h;
}

std::vector<std::uint8_t> render_frame_message(const Scene& scene, const RenderRequest& req, const ServiceConfig& cfg) {
    const Image img = render_image(scene, req.view, cfg.render);
    const FrameHeader h{req.frame_id, static_cast<std::uint16_t>(img.width), static_cast<std::uint16_t>(img.height)};
    return encode_frame(h, cfg.png_frames ? encode_png(img) : to_rgb8(img));
}

// ---------------------------------------------------------------------------
// Server

namespace {

struct Outgoing {
    bool binary = false;
    std::string data;
};

using Pending = std::variant<RenderRequest, RequestError>;

}  // namespace

struct Server::Impl {
    Scene scene;
    ServiceConfig cfg;
    net::io_context ioc{1};
    tcp::acceptor acceptor{ioc};
    std::optional<net::signal_set> signals;
    std::thread io_thread;
    std::thread worker;

    class WsSession;
    std::mutex m;
    std::condition_variable cv;
    std::deque<std::shared_ptr<WsSession>> ready;
    bool stopping = false;
    bool stop_requested = false;
    std::condition_variable stop_cv;

    std::atomic<std::uint64_t> rendered{0};
    std::atomic<std::uint64_t> superseded{0};

    class WsSession : public std::enable_shared_from_this<WsSession> {
    public:
        WsSession(tcp::socket socket, Impl& server) : ws_(std::move(socket)), server_(server) {}

        void run(http::request<http::string_body> req) {
            ws_.set_option(websocket::stream_base::timeout::suggested(beast::role_type::server));
            ws_.async_accept(req, [self = shared_from_this()](beast::error_code ec) {
                if (!ec) self->do_read();
            });
        }

        // Called on the io thread.
        void send(Outgoing msg) {
            if (closed_) return;
            out_.push_back(std::move(msg));
            if (out_.size() == 1) do_write();
        }

        // Guarded by Impl::m.
        std::optional<Pending> slot;
        bool queued = false;
        bool dead = false;

    private:
        void do_read() {
            ws_.async_read(buf_, [self = shared_from_this()](beast::error_code ec, std::size_t) { self->on_read(ec); });
        }

        void on_read(beast::error_code ec) {
            if (ec) {
                closed_ = true;
                std::lock_guard lock(server_.m);
                dead = true;
                slot.reset();
                return;
            }
            Pending p;
            if (ws_.got_text()) {
                const std::string text = beast::buffers_to_string(buf_.data());
                ParseResult r = parse_request(text, server_.cfg);
                if (r.request)
                    p = *r.request;
                else
                    p = *r.error;
            } else {
                p = RequestError{"bad_request", "requests must be JSON text messages", {}};
            }
            buf_.consume(buf_.size());
            server_.submit(shared_from_this(), std::move(p));
            do_read();
        }

        void do_write() {
            ws_.binary(out_.front().binary);
            ws_.async_write(net::buffer(out_.front().data), [self = shared_from_this()](beast::error_code ec, std::size_t) {
                if (ec) {
                    self->closed_ = true;
                    self->out_.clear();
                    return;
                }
                self->out_.pop_front();
                if (!self->out_.empty()) self->do_write();
            });
        }

        websocket::stream<beast::tcp_stream> ws_;
        Impl& server_;
        beast::flat_buffer buf_;
        std::deque<Outgoing> out_;
        bool closed_ = false;
    };

    class HttpSession : public std::enable_shared_from_this<HttpSession> {
    public:
        HttpSession(tcp::socket socket, Impl& server) : stream_(std::move(socket)), server_(server) {}

        void run() {
            stream_.expires_after(std::chrono::seconds(30));
            http::async_read(stream_, buf_, req_, [self = shared_from_this()](beast::error_code ec, std::size_t) {
                self->on_read(ec);
            });
        }

    private:
        void on_read(beast::error_code ec) {
            if (ec) return;
            if (websocket::is_upgrade(req_)) {
                stream_.expires_never();
                std::make_shared<WsSession>(stream_.release_socket(), server_)->run(std::move(req_));
                return;
            }
            auto res = std::make_shared<http::response<http::string_body>>();
            res->version(req_.version());
            res->keep_alive(false);
            if (req_.method() == http::verb::get && req_.target() == "/health") {
                res->result(http::status::ok);
                res->set(http::field::content_type, "application/json");
                res->body() =
                    json{{"n_primitives", server_.scene.size()}, {"sh_degree", server_.scene.sh_degree}}.dump();
            } else {
                res->result(http::status::not_found);
                res->set(http::field::content_type, "text/plain");
                res->body() = "not found\n";
            }
            res->prepare_payload();
            http::async_write(stream_, *res, [self = shared_from_this(), res](beast::error_code, std::size_t) {
                beast::error_code ignored;
                self->stream_.socket().shutdown(tcp::socket::shutdown_send, ignored);
            });
        }

        beast::tcp_stream stream_;
        Impl& server_;
        beast::flat_buffer buf_;
        http::request<http::string_body> req_;
    };

    void do_accept() {
        acceptor.async_accept([this](beast::error_code ec, tcp::socket socket) {
            if (ec) return;  // acceptor closed
            std::make_shared<HttpSession>(std::move(socket), *this)->run();
            do_accept();
        });
    }

    void submit(const std::shared_ptr<WsSession>& s, Pending p) {
        {
            std::lock_guard lock(m);
            if (s->slot) ++superseded;
            s->slot = std::move(p);
            if (!s->queued) {
                s->queued = true;
                ready.push_back(s);
            }
        }
        cv.notify_one();
    }

    void worker_loop() {
        for (;;) {
            std::shared_ptr<WsSession> s;
            Pending job;
            {
                std::unique_lock lock(m);
                cv.wait(lock, [&] { return stopping || !ready.empty(); });
                if (stopping) return;
                s = std::move(ready.front());
                ready.pop_front();
                s->queued = false;
                if (s->dead || !s->slot) continue;
                job = std::move(*s->slot);
                s->slot.reset();
            }
            Outgoing msg;
            if (auto* req = std::get_if<RenderRequest>(&job)) {
                try {
                    const auto bytes = render_frame_message(scene, *req, cfg);
                    msg = {true, std::string(bytes.begin(), bytes.end())};
                    ++rendered;
                } catch (const std::exception& e) {
                    msg = {false, error_json({"bad_request", e.what(), req->frame_id})};
                }
            } else {
                msg = {false, error_json(std::get<RequestError>(job))};
            }
            net::post(ioc, [s, msg = std::move(msg)]() mutable { s->send(std::move(msg)); });
        }
    }

    void request_stop() {
        {
            std::lock_guard lock(m);
            stop_requested = true;
        }
        stop_cv.notify_all();
    }

    void shutdown() {
        request_stop();
        {
            std::lock_guard lock(m);
            stopping = true;
            ready.clear();
        }
        cv.notify_all();
        if (worker.joinable()) worker.join();
        ioc.stop();
        if (io_thread.joinable()) io_thread.join();
    }
};

Server::Server(Scene scene, ServiceConfig cfg) : impl_(std::make_unique<Impl>()) {
    validate(scene);
    impl_->scene = std::move(scene);
    impl_->cfg = cfg;
}

Server::~Server() { stop(); }

std::uint16_t Server::start(const std::string& address, std::uint16_t port) {
    Impl& s = *impl_;
    if (s.io_thread.joinable()) throw Error(ErrorCode::ContractViolation, "server already started");
    beast::error_code ec;
    const auto addr = net::ip::make_address(address, ec);
    if (ec) throw Error(ErrorCode::InvalidArgument, "bad bind address '" + address + "'", "address");
    const tcp::endpoint ep(addr, port);
    s.acceptor.open(ep.protocol(), ec);
    if (!ec) s.acceptor.set_option(net::socket_base::reuse_address(true), ec);
    if (!ec) s.acceptor.bind(ep, ec);
    if (!ec) s.acceptor.listen(net::socket_base::max_listen_connections, ec);
    if (ec) throw Error(ErrorCode::Io, "cannot listen on " + address + ":" + std::to_string(port) + ": " + ec.message());
    const std::uint16_t bound = s.acceptor.local_endpoint().port();
    s.do_accept();
    s.io_thread = std::thread([&s] { s.ioc.run(); });
    s.worker = std::thread([&s] { s.worker_loop(); });
    return bound;
}

void Server::wait() {
    Impl& s = *impl_;
    net::post(s.ioc, [&s] {
        s.signals.emplace(s.ioc, SIGINT, SIGTERM);
        s.signals->async_wait([&s](beast::error_code ec, int) {
            if (!ec) s.request_stop();
        });
    });
    std::unique_lock lock(s.m);
    s.stop_cv.wait(lock, [&] { return s.stop_requested; });
}

void Server::stop() {
    if (impl_) impl_->shutdown();
}

std::uint64_t Server::frames_rendered() const noexcept { return impl_->rendered.load(); }
std::uint64_t Server::requests_superseded() const noexcept { return impl_->superseded.load(); }

// ---------------------------------------------------------------------------
// Client

struct Client::Impl {
    net::io_context ioc;
    websocket::stream<tcp::socket> ws{ioc};
    beast::flat_buffer buf;
    bool open = false;
};

Client::Client() : impl_(std::make_unique<Impl>()) {}

Client::~Client() {
    try {
        close();
    } catch (...) {
    }
}

void Client::connect(const std::string& host, std::uint16_t port) {
    try {
        tcp::resolver resolver(impl_->ioc);
        const auto results = resolver.resolve(host, std::to_string(port));
        net::connect(impl_->ws.next_layer(), results);
        impl_->ws.handshake(host + ":" + std::to_string(port), "/");
        impl_->open = true;
    } catch (const beast::system_error& e) {
        throw Error(ErrorCode::Io, "cannot connect to " + host + ":" + std::to_string(port) + ": " + e.what());
    }
}

void Client::send_text(const std::string& text) {
    try {
        impl_->ws.text(true);
        impl_->ws.write(net::buffer(text));
    } catch (const beast::system_error& e) {
        throw Error(ErrorCode::Io, std::string("send failed: ") + e.what());
    }
}

void Client::send_binary(std::span<const std::uint8_t> bytes) {
    try {
        impl_->ws.binary(true);
        impl_->ws.write(net::buffer(bytes.data(), bytes.size()));
    } catch (const beast::system_error& e) {
        throw Error(ErrorCode::Io, std::string("send failed: ") + e.what());
    }
}

Client::Message Client::receive() {
    try {
        impl_->buf.consume(impl_->buf.size());
        impl_->ws.read(impl_->buf);
        return {impl_->ws.got_binary(), beast::buffers_to_string(impl_->buf.data())};
    } catch (const beast::system_error& e) {
        throw Error(ErrorCode::Io, std::string("receive failed: ") + e.what());
    }
}

void Client::close() {
    if (!impl_ || !impl_->open) return;
    impl_->open = false;
    beast::error_code ec;
    impl_->ws.close(websocket::close_code::normal, ec);
}

std::string http_get(const std::string& host, std::uint16_t port, const std::string& target) {
    try {
        net::io_context ioc;
        tcp::resolver resolver(ioc);
        beast::tcp_stream stream(ioc);
        stream.connect(resolver.resolve(host, std::to_string(port)));
        http::request<http::empty_body> req{http::verb::get, target, 11};
        req.set(http::field::host, host);
        http::write(stream, req);
        beast::flat_buffer buf;
        http::response<http::string_body> res;
        http::read(stream, buf, res);
        beast::error_code ec;
        stream.socket().shutdown(tcp::socket::shutdown_both, ec);
        if (res.result() != http::status::ok)
            throw Error(ErrorCode::Io, "GET " + target + " returned " + std::to_string(res.result_int()));
        return res.body();
    } catch (const beast::system_error& e) {
        throw Error(ErrorCode::Io, "GET " + target + " failed: " + e.what());
    }
}

}  // namespace skewsplat::service
