#include <skewsplat/fit.hpp>
#include <skewsplat/sh.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <random>

namespace skewsplat {

namespace {

Vec4 axis_angle_quat(const Vec3& axis, double angle) {
    const Vec3 a = axis.normalized() * std::sin(0.5 * angle);
    return Vec4(std::cos(0.5 * angle), a.x(), a.y(), a.z());
}

// Least-squares point closest to every optical axis.
Vec3 view_center(const std::vector<TrainView>& views) {
    Mat3 a = Mat3::Zero();
    Vec3 b = Vec3::Zero();
    for (const auto& v : views) {
        const CameraView cv = to_opencv(v.camera);
        const Vec3 o = cv.c2w.block<3, 1>(0, 3);
        const Vec3 d = cv.c2w.block<3, 1>(0, 2).normalized();
        const Mat3 p = Mat3::Identity() - d * d.transpose();
        a += p;
        b += p * o;
    }
    Eigen::ColPivHouseholderQR<Mat3> qr(a);
    qr.setThreshold(1e-9);
    if (qr.rank() < 3) {
        Vec3 c = Vec3::Zero();
        for (const auto& v : views) c += to_opencv(v.camera).c2w.block<3, 1>(0, 3);
        return c / static_cast<double>(views.size());
    }
    return qr.solve(b);
}

}  // namespace

Scene synthetic_blob_scene() {
    Scene s;
    s.sh_degree = 0;
    s.background = Vec3::Zero();

    SkewGaussian a;
    a.mu = Vec3(-0.45, 0.1, 0.0);
    a.log_scale = Vec3(std::log(0.35), std::log(0.18), std::log(0.22));
    a.rot = axis_angle_quat(Vec3(0.2, 0.3, 1.0), 0.6);
    a.sh[0] = rgb_to_sh_dc(Vec3(0.9, 0.2, 0.15));
    a.opacity_logits = Vec2(logit(0.9), logit(0.6));
    a.beta = Vec3(2.0, 0.5, 0.0);
    a.dir = Vec3(0.0, 1.0, 0.0);

    SkewGaussian b;
    b.mu = Vec3(0.4, -0.2, 0.15);
    b.log_scale = Vec3(std::log(0.2), std::log(0.3), std::log(0.2));
    b.rot = axis_angle_quat(Vec3(1.0, -0.4, 0.2), 0.9);
    b.sh[0] = rgb_to_sh_dc(Vec3(0.15, 0.85, 0.25));
    b.opacity_logits = Vec2(logit(0.85), logit(0.85));
    b.beta = Vec3(-1.0, 2.5, 0.5);

    SkewGaussian c;
    c.mu = Vec3(0.05, 0.35, -0.3);
    c.log_scale = Vec3(std::log(0.25), std::log(0.25), std::log(0.12));
    c.rot = axis_angle_quat(Vec3(0.0, 1.0, 0.3), -0.5);
    c.sh[0] = rgb_to_sh_dc(Vec3(0.2, 0.3, 0.95));
    c.opacity_logits = Vec2(logit(0.95), logit(0.4));
    c.beta = Vec3(0.0, 0.0, 0.0);
    c.dir = Vec3(1.5, -1.0, 0.0);

    s.primitives = {a, b, c};
    return s;
}

std::vector<CameraView> orbit_cameras(int count, double radius, int width, int height, double fov_x) {
    if (count < 1) throw Error(ErrorCode::InvalidArgument, "orbit needs at least one camera", "count");
    if (!(radius > 0.0)) throw Error(ErrorCode::InvalidArgument, "orbit radius must be positive", "radius");
    std::vector<CameraView> cams;
    const double pi = std::acos(-1.0);
    for (int i = 0; i < count; ++i) {
        const double theta = 2.0 * pi * i / count;
        const double elev = 0.35 + 0.2 * std::sin(2.0 * theta);
        const Vec3 eye = radius * Vec3(std::cos(elev) * std::cos(theta), std::cos(elev) * std::sin(theta), std::sin(elev));
        cams.push_back(look_at(eye, Vec3::Zero(), Vec3::UnitZ(), width, height, fov_x));
    }
    return cams;
}

void write_synthetic_dataset(const Scene& scene, const std::vector<CameraView>& cams,
                             const std::filesystem::path& dir, const RenderConfig& render) {
    std::filesystem::create_directories(dir);
    std::vector<CameraFrame> frames;
    for (std::size_t i = 0; i < cams.size(); ++i) {
        char name[32];
        std::snprintf(name, sizeof(name), "frame_%05zu.png", i);
        save_png(render_image(scene, cams[i], render), dir / name);
        // Stored Blender-style so loading exercises the convention conversion.
        CameraView gl = to_opencv(cams[i]);
        gl.c2w = gl.c2w * align_matrix();
        gl.convention = Convention::OpenGL_RUB;
        frames.push_back({name, gl});
    }
    save_camera_file(frames, dir / "cameras.json");
}

double camera_extent(const std::vector<TrainView>& views) {
    if (views.empty()) return 1.0;
    Vec3 centroid = Vec3::Zero();
    for (const auto& v : views) centroid += to_opencv(v.camera).c2w.block<3, 1>(0, 3);
    centroid /= static_cast<double>(views.size());
    double r = 0.0;
    for (const auto& v : views) r = std::max(r, (to_opencv(v.camera).c2w.block<3, 1>(0, 3) - centroid).norm());
    return r > 0.0 ? 1.1 * r : 1.0;
}

Scene init_multiview_scene(const Dataset& data, int n_init, std::uint64_t seed, int sh_degree) {
    if (data.train.empty()) throw Error(ErrorCode::InvalidArgument, "no training views", "train");
    if (n_init < 1) throw Error(ErrorCode::InvalidArgument, "need at least one primitive", "n_init");
    const Vec3 center = view_center(data.train);
    double dist = 0.0;
    for (const auto& v : data.train) dist += (to_opencv(v.camera).c2w.block<3, 1>(0, 3) - center).norm();
    dist /= static_cast<double>(data.train.size());
    const double half = 0.25 * dist;

    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::vector<Vec3> pts(n_init);
    for (auto& p : pts) p = center + half * Vec3(u(rng), u(rng), u(rng));

    // Colors sampled from the first view that sees each point.
    Scene scene;
    scene.sh_degree = sh_degree;
    scene.background = Vec3::Zero();
    for (int i = 0; i < n_init; ++i) {
        double nn = std::numeric_limits<double>::infinity();
        for (int j = 0; j < n_init; ++j)
            if (j != i) nn = std::min(nn, (pts[i] - pts[j]).norm());
        if (!std::isfinite(nn)) nn = half;

        SkewGaussian g;
        g.mu = pts[i];
        g.log_scale = Vec3::Constant(std::log(std::max(nn, 1e-6)));
        g.opacity_logits = Vec2::Constant(logit(0.1));
        Vec3 rgb = Vec3::Constant(0.5);
        for (const auto& v : data.train) {
            const ViewTransform vt = ViewTransform::from(v.camera);
            const Vec3 pc = vt.w2c_rot * pts[i] + vt.w2c_trans;
            if (pc.z() <= vt.near) continue;
            const double px = vt.fx * pc.x() / pc.z() + vt.cx, py = vt.fy * pc.y() / pc.z() + vt.cy;
            if (px < 0.0 || py < 0.0 || px >= vt.width || py >= vt.height) continue;
            rgb = v.image.pixel(static_cast<int>(px), static_cast<int>(py));
            break;
        }
        g.sh[0] = rgb_to_sh_dc(rgb);
        scene.primitives.push_back(g);
    }
    return scene;
}

TrainConfig MultiviewConfig::default_train_config() {
    TrainConfig t;
    t.iterations = 5000;
    t.densify = true;
    t.densify_start = 500;
    t.densify_end = 3500;
    t.densify_interval = 100;
    t.max_primitives = 20000;
    return t;
}

MultiviewResult fit_multiview(const Dataset& data, const MultiviewConfig& cfg,
                              const std::function<void(const TrainLogEntry&)>& log) {
    if (data.train.empty()) throw Error(ErrorCode::InvalidArgument, "dataset has no training views", "train");
    TrainConfig tc = cfg.train;
    tc.spatial_scale = camera_extent(data.train);
    Scene init = init_multiview_scene(data, cfg.n_init, cfg.seed, cfg.sh_degree);
    Trainer trainer(std::move(init), data.train, tc, cfg.render, cfg.seed);
    trainer.run(log);
    MultiviewResult r;
    r.scene = trainer.scene();
    r.test = evaluate(r.scene, data.test, cfg.render);
    r.densify_totals = trainer.densify_totals();
    r.tau_z = trainer.tau_z();
    return r;
}

}  // namespace skewsplat
