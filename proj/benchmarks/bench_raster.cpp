#include <skewsplat/fit.hpp>
#include <skewsplat/metrics.hpp>
#include <skewsplat/raster.hpp>

#include <benchmark/benchmark.h>

#include <random>

using namespace skewsplat;

namespace {

// n primitives scattered in front of a 128x128 camera, with random skew.
Scene random_scene(int n, bool skew) {
    std::mt19937_64 rng(1);
    std::normal_distribution<double> nd;
    std::uniform_real_distribution<double> u(0.05, 0.95);
    Scene s;
    for (int i = 0; i < n; ++i) {
        SkewGaussian g;
        g.mu = Vec3(nd(rng), nd(rng), nd(rng)) * 0.8;
        g.log_scale = Vec3::Constant(std::log(0.05 + 0.1 * u(rng)));
        g.rot = Vec4(nd(rng), nd(rng), nd(rng), nd(rng)).normalized();
        g.sh[0] = Vec3(u(rng), u(rng), u(rng));
        g.opacity_logits = Vec2(logit(u(rng)), logit(u(rng)));
        if (skew) {
            g.beta = Vec3(nd(rng), nd(rng), nd(rng)) * 10.0;
            g.dir = Vec3(nd(rng), nd(rng), nd(rng)) * 5.0;
        } else {
            g.opacity_logits[1] = g.opacity_logits[0];
        }
        s.primitives.push_back(g);
    }
    return s;
}

CameraView bench_camera() { return look_at(Vec3(0, 0, -5), Vec3::Zero(), Vec3::UnitY(), 128, 128, 0.8); }

void BM_Forward(benchmark::State& state) {
    const Scene s = random_scene(static_cast<int>(state.range(0)), state.range(1) != 0);
    const CameraView cam = bench_camera();
    RenderConfig cfg;
    cfg.threads = 1;
    for (auto _ : state) benchmark::DoNotOptimize(render_forward(s, cam, cfg));
    state.SetItemsProcessed(state.iterations() * cam.width * cam.height);
}
BENCHMARK(BM_Forward)->ArgsProduct({{100, 1000, 5000}, {0, 1}})->Unit(benchmark::kMillisecond);

void BM_Backward(benchmark::State& state) {
    const Scene s = random_scene(static_cast<int>(state.range(0)), true);
    const CameraView cam = bench_camera();
    RenderConfig cfg;
    cfg.threads = 1;
    const FrameBundle fb = render_forward(s, cam, cfg);
    const std::vector<double> dL(fb.color.data.size(), 0.01);
    for (auto _ : state) benchmark::DoNotOptimize(render_backward(s, cam, fb, dL, cfg));
}
BENCHMARK(BM_Backward)->Arg(100)->Arg(1000)->Arg(5000)->Unit(benchmark::kMillisecond);

void BM_SsimWithGrad(benchmark::State& state) {
    const int n = static_cast<int>(state.range(0));
    Image a(n, n), b(n, n);
    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> u;
    for (double& v : a.data) v = u(rng);
    for (double& v : b.data) v = u(rng);
    std::vector<double> g;
    for (auto _ : state) benchmark::DoNotOptimize(ssim_with_grad(a, b, g));
}
BENCHMARK(BM_SsimWithGrad)->Arg(64)->Arg(256)->Unit(benchmark::kMillisecond);

void BM_TrainIteration(benchmark::State& state) {
    const Scene truth = synthetic_blob_scene();
    std::vector<TrainView> views;
    for (const auto& cam : orbit_cameras(4, 4.0, 64, 64, 0.6)) views.push_back({cam, render_image(truth, cam)});
    Dataset d;
    d.train = views;
    TrainConfig tc;
    tc.iterations = 1 << 30;
    tc.densify = false;
    tc.spatial_scale = camera_extent(views);
    RenderConfig rc;
    rc.threads = 1;
    Trainer t(init_multiview_scene(d, 200, 0, 0), views, tc, rc, 0);
    for (auto _ : state) benchmark::DoNotOptimize(t.step());
}
BENCHMARK(BM_TrainIteration)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
