#include <skewsplat/fit.hpp>
#include <skewsplat/metrics.hpp>
#include <skewsplat/sh.hpp>

#include <cmath>
#include <limits>
#include <random>

namespace skewsplat {

CameraView image_plane_camera(int width, int height) {
    CameraView v;
    v.convention = Convention::OpenCV_RDF;
    v.width = width;
    v.height = height;
    v.fov_x = 2.0 * std::atan(0.5);
    v.near = 0.01;
    v.far = 1e6;
    return v;
}

TrainConfig Fit2DConfig::default_train_config() {
    TrainConfig t;
    t.iterations = 2000;
    // Scene units are pixels on the focal plane.
    t.lr_position = 2e-3;
    t.lr_position_final = 2e-5;
    t.lr_scale = 1e-2;
    t.lr_rot = 5e-3;
    t.lr_opacity = 5e-2;
    t.lr_sh = 1e-2;
    t.lr_beta = 3e-3;
    t.densify = false;
    t.lambda_ssim = 0.2;
    return t;
}

Scene init_image_scene(const Image& target, int n_primitives, std::uint64_t seed, int sh_degree) {
    if (target.width < 1 || target.height < 1) throw Error(ErrorCode::InvalidArgument, "empty target image");
    if (n_primitives < 1) throw Error(ErrorCode::InvalidArgument, "need at least one primitive", "n_primitives");
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const double f = target.width;

    std::vector<Vec2> px(n_primitives);
    for (auto& p : px) p = Vec2(u(rng) * target.width, u(rng) * target.height);

    Scene scene;
    scene.sh_degree = sh_degree;
    scene.background = Vec3::Zero();
    for (int i = 0; i < n_primitives; ++i) {
        double nn = std::numeric_limits<double>::infinity();
        for (int j = 0; j < n_primitives; ++j)
            if (j != i) nn = std::min(nn, (px[i] - px[j]).norm());
        if (!std::isfinite(nn)) nn = 0.5 * std::min(target.width, target.height);
        nn = std::max(nn, 0.5);

        SkewGaussian g;
        g.mu = Vec3(px[i].x() - 0.5 * target.width, px[i].y() - 0.5 * target.height, f);
        g.log_scale = Vec3::Constant(std::log(nn));
        const int sx = std::min(target.width - 1, static_cast<int>(px[i].x()));
        const int sy = std::min(target.height - 1, static_cast<int>(px[i].y()));
        g.sh[0] = rgb_to_sh_dc(target.pixel(sx, sy));
        g.opacity_logits = Vec2::Constant(logit(0.1));
        scene.primitives.push_back(g);
    }
    return scene;
}

Fit2DResult fit2d(const Image& target, const Fit2DConfig& cfg, const std::function<void(const TrainLogEntry&)>& log) {
    if (target.width < 32 || target.height < 32)
        throw Error(ErrorCode::InvalidArgument, "2D fitting needs an image of at least 32x32", "target");
    Fit2DResult res;
    res.camera = image_plane_camera(target.width, target.height);
    Scene init = init_image_scene(target, cfg.n_primitives, cfg.seed);
    TrainConfig tc = cfg.train;
    Trainer trainer(std::move(init), {TrainView{res.camera, target}}, tc, cfg.render, cfg.seed);
    trainer.run([&](const TrainLogEntry& e) {
        res.psnr_curve.emplace_back(e.iteration, e.psnr);
        if (log) log(e);
    });
    res.scene = trainer.scene();
    res.final_psnr = psnr(render_image(res.scene, res.camera, cfg.render), target);
    return res;
}

}  // namespace skewsplat
