#include <skewsplat/camera.hpp>
#include <skewsplat/raster.hpp>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "scenes.hpp"

#include <random>

using namespace skewsplat;

namespace {

CameraView as_opengl(const CameraView& cv) {
    CameraView gl = cv;
    gl.c2w = cv.c2w * align_matrix();
    gl.convention = Convention::OpenGL_RUB;
    return gl;
}

}  // namespace

TEST(Camera, AlignIsAnInvolution) {
    EXPECT_EQ(align_matrix() * align_matrix(), Mat4::Identity());
}

TEST(Camera, ToOpencvRoundTrip) {
    std::mt19937_64 rng(4);
    for (int i = 0; i < 10; ++i) {
        const auto ts = skewsplat::testing::random_scene(rng);
        const CameraView gl = as_opengl(ts.view);
        const CameraView back = to_opencv(gl);
        EXPECT_EQ(back.convention, Convention::OpenCV_RDF);
        EXPECT_LE((back.c2w - ts.view.c2w).cwiseAbs().maxCoeff(), 0.0);
        EXPECT_EQ(to_opencv(ts.view).c2w, ts.view.c2w);
    }
}

TEST(Camera, OpenglLooksDownNegativeZ) {
    // Identity OpenGL pose: a point at z = -5 lands at the image center.
    CameraView gl;
    gl.convention = Convention::OpenGL_RUB;
    gl.width = gl.height = 32;
    gl.fov_x = 1.0;
    const ViewTransform vt = ViewTransform::from(gl);
    const Vec3 pc = vt.w2c_rot * Vec3(0, 0, -5) + vt.w2c_trans;
    EXPECT_NEAR(pc.z(), 5.0, 1e-12);
    EXPECT_NEAR(pc.x(), 0.0, 1e-12);
    // +y world is up for OpenGL, i.e. toward smaller pixel rows.
    const Vec3 up = vt.w2c_rot * Vec3(0, 1, -5) + vt.w2c_trans;
    EXPECT_LT(vt.fy * up.y() / up.z() + vt.cy, vt.cy);
}

TEST(Camera, BlenderConventionRendersPixelIdentical) {
    std::mt19937_64 rng(5);
    for (int i = 0; i < 10; ++i) {
        skewsplat::testing::RandomSceneOptions opt;
        opt.width = 24;
        opt.height = 16;
        const auto ts = skewsplat::testing::random_scene(rng, opt);
        const Image a = render_image(ts.scene, ts.view);
        const Image b = render_image(ts.scene, as_opengl(ts.view));
        EXPECT_EQ(a.data, b.data);
    }
}

TEST(Camera, FovYFollowsAspect) {
    EXPECT_NEAR(fov_y_from_aspect(1.0, 64, 64), 1.0, 1e-15);
    const double fy = fov_y_from_aspect(1.2, 200, 100);
    EXPECT_NEAR(std::tan(fy / 2), std::tan(0.6) / 2, 1e-15);
    CameraView v;
    v.width = 200;
    v.height = 100;
    v.fov_x = 1.2;
    const Mat3 k = intrinsics(v);
    EXPECT_NEAR(k(0, 0), k(1, 1), 1e-9);
    EXPECT_NEAR(k(0, 2), 100.0, 0.0);
    EXPECT_NEAR(k(1, 2), 50.0, 0.0);
    EXPECT_NEAR(k(0, 0), 100.0 / std::tan(0.6), 1e-9);
}

TEST(Camera, LookAtCentersTheTarget) {
    const CameraView v = look_at(Vec3(3, -2, 1), Vec3(0.5, 0.5, 0.5), Vec3::UnitZ(), 40, 30, 0.8);
    validate(v);
    const ViewTransform vt = ViewTransform::from(v);
    const Vec3 pc = vt.w2c_rot * Vec3(0.5, 0.5, 0.5) + vt.w2c_trans;
    EXPECT_NEAR(pc.x(), 0.0, 1e-12);
    EXPECT_NEAR(pc.y(), 0.0, 1e-12);
    EXPECT_GT(pc.z(), 0.0);
    // World up projects toward the top of the image.
    const Vec3 above = vt.w2c_rot * Vec3(0.5, 0.5, 1.5) + vt.w2c_trans;
    EXPECT_LT(above.y(), 0.0);
}

TEST(Camera, ValidateRejectsBadViews) {
    CameraView v;
    v.width = v.height = 8;
    validate(v);
    CameraView a = v;
    a.c2w(3, 0) = 0.1;
    EXPECT_THROW(validate(a), Error);
    CameraView b = v;
    b.c2w(0, 0) = 2.0;
    EXPECT_THROW(validate(b), Error);
    CameraView c = v;
    c.fov_x = 3.5;
    EXPECT_THROW(validate(c), Error);
    CameraView d = v;
    d.width = 0;
    EXPECT_THROW(validate(d), Error);
}

TEST(Camera, ParseConvention) {
    EXPECT_EQ(parse_convention("OpenGL"), Convention::OpenGL_RUB);
    EXPECT_EQ(parse_convention("opencv"), Convention::OpenCV_RDF);
    EXPECT_EQ(parse_convention("blender"), Convention::OpenGL_RUB);
    EXPECT_FALSE(parse_convention("directx").has_value());
}

TEST(Camera, ProjectedMeanMatchesPinhole) {
    std::mt19937_64 rng(6);
    for (int i = 0; i < 10; ++i) {
        skewsplat::testing::RandomSceneOptions opt;
        opt.width = opt.height = 32;
        const auto ts = skewsplat::testing::random_scene(rng, opt);
        const ViewTransform vt = ViewTransform::from(ts.view);
        for (const auto& g : ts.scene.primitives) {
            const auto s = project_splat(g, vt, ts.scene.sh_degree, {});
            const Vec3 pc = vt.w2c_rot * g.mu + vt.w2c_trans;
            if (!s) continue;
            EXPECT_NEAR(s->mean2d.x(), vt.fx * pc.x() / pc.z() + vt.cx, 1e-9);
            EXPECT_NEAR(s->mean2d.y(), vt.fy * pc.y() / pc.z() + vt.cy, 1e-9);
            EXPECT_NEAR(s->depth, pc.z(), 1e-12);
        }
    }
}

TEST(Camera, PrimitiveBehindCameraIsCulled) {
    const CameraView v = look_at(Vec3(0, 0, -5), Vec3::Zero(), Vec3::UnitY(), 16, 16, 0.8);
    SkewGaussian g;
    g.mu = Vec3(0, 0, -8);
    g.log_scale = Vec3::Constant(std::log(0.1));
    g.opacity_logits = Vec2(2.0, 2.0);
    EXPECT_FALSE(project_splat(g, ViewTransform::from(v), 0, {}).has_value());
    g.mu = Vec3(0, 0, 0);
    EXPECT_TRUE(project_splat(g, ViewTransform::from(v), 0, {}).has_value());
}

TEST(Camera, ZeroBetaProjectsToZeroSkew) {
    std::mt19937_64 rng(7);
    const auto c = skewsplat::testing::random_skew_case(rng);
    const Mat2 cov = c.T * c.sigma * c.T.transpose();
    const auto s = project_skewness(Vec3::Zero(), c.T, c.sigma, cov);
    EXPECT_EQ(s.beta_x, 0.0);
    EXPECT_EQ(s.beta_y, 0.0);
}

TEST(Camera, SkewProjectionIsLinearInScaleOfT) {
    // Scaling T by k scales y by k, so beta_2d must scale by 1/k.
    std::mt19937_64 rng(8);
    const auto c = skewsplat::testing::random_skew_case(rng);
    const Mat2 cov = c.T * c.sigma * c.T.transpose();
    const auto a = project_skewness(c.beta, c.T, c.sigma, cov);
    const auto b = project_skewness(c.beta, 3.0 * c.T, c.sigma, 9.0 * cov);
    EXPECT_NEAR(b.beta_x, a.beta_x / 3.0, 1e-12);
    EXPECT_NEAR(b.beta_y, a.beta_y / 3.0, 1e-12);
}

TEST(Camera, SkewProjectionMatchesMonteCarlo) {
    std::mt19937_64 rng(9);
    for (int i = 0; i < 4; ++i) {
        const auto c = skewsplat::testing::random_skew_case(rng);
        EXPECT_LT(skewsplat::testing::skew_projection_l1(c, 200000, 100 + i), 0.04) << "case " << i;
    }
}

TEST(Camera, DilatedSkewProjectionMatchesMonteCarlo) {
    std::mt19937_64 rng(10);
    for (int i = 0; i < 3; ++i) {
        const auto c = skewsplat::testing::random_skew_case(rng);
        EXPECT_LT(skewsplat::testing::skew_projection_l1(c, 200000, 200 + i, 0.3), 0.04) << "case " << i;
    }
}
