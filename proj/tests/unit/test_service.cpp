#include <skewsplat/fit.hpp>
#include <skewsplat/image.hpp>
#include <skewsplat/service.hpp>

#include <gtest/gtest.h>

#include <json.hpp>

using namespace skewsplat;
using namespace skewsplat::service;
using nlohmann::json;

namespace {

RenderRequest make_request(std::uint32_t id, int w = 24, int h = 18) {
    RenderRequest r;
    r.frame_id = id;
    r.view = orbit_cameras(12, 4.0, w, h, 0.7)[id % 12];
    r.view.c2w = r.view.c2w * align_matrix();
    r.view.convention = Convention::OpenGL_RUB;
    return r;
}

std::vector<std::uint8_t> bytes_of(const std::string& s) { return {s.begin(), s.end()}; }

class ServiceTest : public ::testing::Test {
protected:
    void start(Scene scene, ServiceConfig cfg = {}) {
        cfg_ = cfg;
        scene_ = scene;
        server_ = std::make_unique<Server>(std::move(scene), cfg);
        port_ = server_->start("127.0.0.1", 0);
        client_.connect("127.0.0.1", port_);
    }
    void TearDown() override {
        if (server_) {
            client_.close();
            server_->stop();
        }
    }

    Scene scene_;
    ServiceConfig cfg_;
    std::unique_ptr<Server> server_;
    std::uint16_t port_ = 0;
    Client client_;
};

}  // namespace

TEST(Protocol, HeaderIsLittleEndian) {
    const std::vector<std::uint8_t> payload = {9, 8, 7};
    const auto msg = encode_frame({0x04030201u, 0x0605, 0x0807}, payload);
    ASSERT_EQ(msg.size(), kFrameHeaderBytes + 3);
    const std::vector<std::uint8_t> head(msg.begin(), msg.begin() + 8);
    EXPECT_EQ(head, (std::vector<std::uint8_t>{1, 2, 3, 4, 5, 6, 7, 8}));
    const FrameHeader h = decode_frame_header(msg);
    EXPECT_EQ(h.frame_id, 0x04030201u);
    EXPECT_EQ(h.width, 0x0605);
    EXPECT_EQ(h.height, 0x0807);
    const std::vector<std::uint8_t> shorty = {1, 2, 3};
    try {
        decode_frame_header(shorty);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::TruncatedPayload);
    }
}

TEST(Protocol, RequestRoundTrip) {
    const RenderRequest r = make_request(77, 30, 20);
    const auto p = parse_request(request_json(r), {});
    ASSERT_TRUE(p.request);
    EXPECT_EQ(p.request->frame_id, 77u);
    EXPECT_EQ(p.request->view.c2w, r.view.c2w);
    EXPECT_EQ(p.request->view.convention, Convention::OpenGL_RUB);
    EXPECT_EQ(p.request->view.width, 30);
}

TEST(Protocol, ParseErrors) {
    auto code_of = [](const std::string& text, const ServiceConfig& cfg = {}) {
        const auto p = parse_request(text, cfg);
        EXPECT_FALSE(p.request);
        return p.error ? p.error->code : std::string();
    };
    EXPECT_EQ(code_of("{\"frame_id\": 1, \"c2w\""), "bad_request");
    EXPECT_EQ(code_of("[1, 2]"), "bad_request");
    json j = json::parse(request_json(make_request(5)));
    j.erase("fov_x");
    EXPECT_EQ(code_of(j.dump()), "bad_request");
    EXPECT_EQ(parse_request(j.dump(), {}).error->frame_id, 5u);

    j = json::parse(request_json(make_request(5)));
    j["convention"] = "directx";
    EXPECT_EQ(code_of(j.dump()), "bad_request");

    j = json::parse(request_json(make_request(5)));
    j["frame_id"] = -1;
    EXPECT_EQ(code_of(j.dump()), "bad_request");
    EXPECT_FALSE(parse_request(j.dump(), {}).error->frame_id);

    j = json::parse(request_json(make_request(5)));
    j["width"] = 5000;
    EXPECT_EQ(code_of(j.dump()), "too_large");
    ServiceConfig small;
    small.max_height = 10;
    EXPECT_EQ(code_of(request_json(make_request(5)), small), "too_large");

    j = json::parse(request_json(make_request(5)));
    j["c2w"][0] = 3.0;
    EXPECT_EQ(code_of(j.dump()), "bad_request");
}

TEST(Protocol, ErrorJsonShape) {
    const json a = json::parse(error_json({"too_large", "big", 4u}));
    EXPECT_EQ(a["frame_id"], 4);
    EXPECT_EQ(a["error"]["code"], "too_large");
    EXPECT_EQ(a["error"]["message"], "big");
    const json b = json::parse(error_json({"bad_request", "x", std::nullopt}));
    EXPECT_TRUE(b["frame_id"].is_null());
}

TEST(Protocol, FrameMessageMatchesTrajectoryRender) {
    const Scene s = synthetic_blob_scene();
    const RenderRequest r = make_request(3, 40, 30);
    const auto msg = render_frame_message(s, r, {});
    const auto dir = std::filesystem::temp_directory_path() / "skewsplat_test_service_traj";
    std::filesystem::remove_all(dir);
    const auto paths = render_trajectory(s, {{"", r.view}}, dir);
    const auto rgb = to_rgb8(load_png(paths[0]));
    ASSERT_EQ(msg.size(), kFrameHeaderBytes + rgb.size());
    EXPECT_TRUE(std::equal(rgb.begin(), rgb.end(), msg.begin() + kFrameHeaderBytes));
    std::filesystem::remove_all(dir);
}

TEST_F(ServiceTest, EmptySceneReturnsBackground) {
    Scene s;
    s.background = Vec3(0.2, 0.4, 0.6);
    start(s);
    client_.send_text(request_json(make_request(9, 10, 7)));
    const auto m = client_.receive();
    ASSERT_TRUE(m.binary);
    ASSERT_EQ(m.data.size(), kFrameHeaderBytes + 10 * 7 * 3);
    const auto bytes = bytes_of(m.data);
    const FrameHeader h = decode_frame_header(bytes);
    EXPECT_EQ(h.frame_id, 9u);
    EXPECT_EQ(h.width, 10);
    EXPECT_EQ(h.height, 7);
    for (std::size_t i = kFrameHeaderBytes; i < bytes.size(); i += 3) {
        EXPECT_EQ(bytes[i], quantize_channel(0.2));
        EXPECT_EQ(bytes[i + 1], quantize_channel(0.4));
        EXPECT_EQ(bytes[i + 2], quantize_channel(0.6));
    }
}

TEST_F(ServiceTest, ResponseIsByteEqualToOfflineRender) {
    start(synthetic_blob_scene());
    for (std::uint32_t id : {1u, 2u}) {
        const RenderRequest r = make_request(id, 33, 21);
        client_.send_text(request_json(r));
        const auto m = client_.receive();
        ASSERT_TRUE(m.binary);
        EXPECT_EQ(bytes_of(m.data), render_frame_message(scene_, r, cfg_));
    }
}

TEST_F(ServiceTest, BadRequestThenNextIsServed) {
    start(synthetic_blob_scene());
    client_.send_text("{\"frame_id\": 4, \"c2w\": [1, 0");
    auto m = client_.receive();
    ASSERT_FALSE(m.binary);
    const json err = json::parse(m.data);
    EXPECT_EQ(err["error"]["code"], "bad_request");
    client_.send_text(request_json(make_request(5)));
    m = client_.receive();
    ASSERT_TRUE(m.binary);
    EXPECT_EQ(decode_frame_header(bytes_of(m.data)).frame_id, 5u);
}

TEST_F(ServiceTest, BinaryAndOversizeRequestsAreRejected) {
    ServiceConfig cfg;
    cfg.max_width = 32;
    start(synthetic_blob_scene(), cfg);
    const std::vector<std::uint8_t> junk = {1, 2, 3};
    client_.send_binary(junk);
    auto m = client_.receive();
    ASSERT_FALSE(m.binary);
    EXPECT_EQ(json::parse(m.data)["error"]["code"], "bad_request");
    client_.send_text(request_json(make_request(6, 64, 16)));
    m = client_.receive();
    ASSERT_FALSE(m.binary);
    const json j = json::parse(m.data);
    EXPECT_EQ(j["error"]["code"], "too_large");
    EXPECT_EQ(j["frame_id"], 6);
}

TEST_F(ServiceTest, BurstKeepsFrameIdsMonotone) {
    start(synthetic_blob_scene());
    const std::uint32_t last = 40;
    for (std::uint32_t id = 1; id <= last; ++id) client_.send_text(request_json(make_request(id, 48, 48)));
    std::uint32_t prev = 0;
    int received = 0;
    while (true) {
        const auto m = client_.receive();
        ASSERT_TRUE(m.binary);
        const auto id = decode_frame_header(bytes_of(m.data)).frame_id;
        EXPECT_GE(id, prev);
        prev = id;
        ++received;
        if (id == last) break;
    }
    EXPECT_LE(received, static_cast<int>(last));
    EXPECT_EQ(server_->frames_rendered() + server_->requests_superseded(), last);
}

TEST_F(ServiceTest, PngFramesDecodeToTheSamePixels) {
    ServiceConfig cfg;
    cfg.png_frames = true;
    start(synthetic_blob_scene(), cfg);
    const RenderRequest r = make_request(8, 20, 16);
    client_.send_text(request_json(r));
    const auto m = client_.receive();
    ASSERT_TRUE(m.binary);
    const auto bytes = bytes_of(m.data);
    const std::vector<std::uint8_t> png(bytes.begin() + kFrameHeaderBytes, bytes.end());
    EXPECT_EQ(to_rgb8(decode_png(png)), to_rgb8(render_image(scene_, r.view)));
}

TEST_F(ServiceTest, HealthEndpoint) {
    Scene s = synthetic_blob_scene();
    s.sh_degree = 1;
    start(s);
    const json h = json::parse(http_get("127.0.0.1", port_, "/health"));
    EXPECT_EQ(h["n_primitives"], s.size());
    EXPECT_EQ(h["sh_degree"], 1);
    EXPECT_THROW(http_get("127.0.0.1", port_, "/nope"), Error);
}

TEST_F(ServiceTest, ConnectionsAreIndependent) {
    start(synthetic_blob_scene());
    Client other;
    other.connect("127.0.0.1", port_);
    other.send_text(request_json(make_request(100)));
    client_.send_text(request_json(make_request(200)));
    EXPECT_EQ(decode_frame_header(bytes_of(other.receive().data)).frame_id, 100u);
    EXPECT_EQ(decode_frame_header(bytes_of(client_.receive().data)).frame_id, 200u);
    other.close();
}
