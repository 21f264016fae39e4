#include "reference_renderer.hpp"
#include "scenes.hpp"

#include <skewsplat/raster.hpp>

#include <gtest/gtest.h>

#include <random>

namespace skewsplat {
namespace {

double max_abs_diff(const Image& a, const Image& b) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.data.size(); ++i) m = std::max(m, std::abs(a.data[i] - b.data[i]));
    return m;
}

testing::RandomSceneOptions degenerate_options() {
    testing::RandomSceneOptions opt;
    opt.symmetric = true;
    opt.width = 40;
    opt.height = 28;
    opt.n_min = 5;
    opt.n_max = 25;
    opt.px_scale_min = 0.5;
    opt.px_scale_max = 6.0;
    return opt;
}

TEST(RasterForward, SymmetricSceneMatchesReference) {
    std::mt19937_64 rng(11);
    for (int s = 0; s < 8; ++s) {
        const auto ts = testing::random_scene(rng, degenerate_options());
        const Image ours = render_image(ts.scene, ts.view);
        const Image ref = testing::reference_render(ts.scene, ts.view);
        EXPECT_LE(max_abs_diff(ours, ref), 1e-6) << "scene " << s;
    }
}

TEST(RasterForward, SymmetricSceneMatchesReferenceWithoutDilation) {
    std::mt19937_64 rng(12);
    RenderConfig cfg;
    cfg.dilation = 0.0;
    testing::ReferenceSettings rs;
    rs.dilation = 0.0;
    for (int s = 0; s < 4; ++s) {
        const auto ts = testing::random_scene(rng, degenerate_options());
        EXPECT_LE(max_abs_diff(render_image(ts.scene, ts.view, cfg), testing::reference_render(ts.scene, ts.view, rs)),
                  1e-6);
    }
}

TEST(RasterForward, EmptySceneIsBackground) {
    Scene s;
    s.background = Vec3(0.2, 0.4, 0.6);
    CameraView v;
    v.width = 17;
    v.height = 9;
    const FrameBundle fb = render_forward(s, v);
    for (int y = 0; y < v.height; ++y)
        for (int x = 0; x < v.width; ++x) {
            EXPECT_EQ(fb.color.pixel(x, y), s.background);
            EXPECT_EQ(fb.final_T[y * v.width + x], 1.0);
        }
}

TEST(RasterForward, ResultIndependentOfThreadsAndTiles) {
    std::mt19937_64 rng(13);
    testing::RandomSceneOptions opt;
    opt.width = 50;
    opt.height = 37;
    opt.n_min = 20;
    opt.n_max = 40;
    for (int s = 0; s < 3; ++s) {
        const auto ts = testing::random_scene(rng, opt);
        RenderConfig one;
        one.threads = 1;
        const Image base = render_image(ts.scene, ts.view, one);
        for (int threads : {2, 4, 7}) {
            RenderConfig c;
            c.threads = threads;
            EXPECT_EQ(render_image(ts.scene, ts.view, c).data, base.data);
        }
        for (int tile : {1, 7, 16, 64}) {
            RenderConfig c;
            c.tile_px = tile;
            EXPECT_EQ(render_image(ts.scene, ts.view, c).data, base.data) << "tile " << tile;
        }
    }
}

TEST(RasterForward, TransmittanceAndColorStayInRange) {
    std::mt19937_64 rng(14);
    testing::RandomSceneOptions opt;
    opt.width = opt.height = 24;
    opt.n_min = 10;
    opt.n_max = 30;
    opt.skew_strength = 4.0;
    for (int s = 0; s < 5; ++s) {
        const auto ts = testing::random_scene(rng, opt);
        const FrameBundle fb = render_forward(ts.scene, ts.view);
        for (double t : fb.final_T) {
            EXPECT_GE(t, 0.0);
            EXPECT_LE(t, 1.0);
        }
        for (double v : fb.color.data) EXPECT_TRUE(std::isfinite(v));
    }
}

TEST(RasterForward, OpacityPairSelectsSideOfBoundary) {
    // A single splat with opacity 0.9 on the +x side of its boundary and 0.1
    // on the -x side.
    const CameraView v = look_at(Vec3(0, 0, -10), Vec3::Zero(), Vec3::UnitY(), 32, 32, 0.5);
    Scene s;
    SkewGaussian g;
    g.log_scale = Vec3::Constant(std::log(0.5));
    g.opacity_logits = Vec2(logit(0.9), logit(0.1));
    const ViewTransform vt = ViewTransform::from(v);
    // Boundary normal along camera +x, strong enough to act as a step.
    g.dir = vt.w2c_rot.transpose() * Vec3(40.0, 0.0, 0.0);
    g.sh[0] = Vec3::Constant(1.0);
    s.primitives.push_back(g);
    const Image img = render_image(s, v);
    const double right = img.at(20, 16, 0), left = img.at(11, 16, 0);
    EXPECT_GT(right, 4.0 * left);
}

TEST(RasterForward, SkewMovesMassToOneSide) {
    const CameraView v = look_at(Vec3(0, 0, -10), Vec3::Zero(), Vec3::UnitY(), 32, 32, 0.5);
    const ViewTransform vt = ViewTransform::from(v);
    Scene s;
    SkewGaussian g;
    g.log_scale = Vec3::Constant(std::log(0.5));
    g.opacity_logits = Vec2(logit(0.4), logit(0.4));
    g.beta = vt.w2c_rot.transpose() * Vec3(0.0, 6.0, 0.0);
    g.sh[0] = Vec3::Constant(1.0);
    s.primitives.push_back(g);
    const Image img = render_image(s, v);
    double below = 0.0, above = 0.0;
    for (int x = 0; x < 32; ++x)
        for (int y = 0; y < 32; ++y) (y >= 16 ? below : above) += img.at(x, y, 1);
    EXPECT_GT(below, 5.0 * above);
}

TEST(RasterForward, RejectsOversizeImage) {
    Scene s;
    CameraView v;
    v.width = 20000;
    v.height = 2;
    EXPECT_THROW(render_forward(s, v), Error);
}

TEST(RasterForward, FingerprintTracksInputs) {
    std::mt19937_64 rng(15);
    const auto ts = testing::random_scene(rng);
    const auto a = render_fingerprint(ts.scene, ts.view, {});
    EXPECT_EQ(a, render_fingerprint(ts.scene, ts.view, {}));
    Scene moved = ts.scene;
    moved.primitives[0].mu.x() += 1e-9;
    EXPECT_NE(a, render_fingerprint(moved, ts.view, {}));
    RenderConfig c;
    c.dilation = 0.2;
    EXPECT_NE(a, render_fingerprint(ts.scene, ts.view, c));
    // Thread count does not change the frame, so it is not part of the hash.
    RenderConfig t;
    t.threads = 3;
    EXPECT_EQ(a, render_fingerprint(ts.scene, ts.view, t));
}

}  // namespace
}  // namespace skewsplat
