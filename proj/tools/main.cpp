#include <skewsplat/fit.hpp>
#include <skewsplat/metrics.hpp>
#include <skewsplat/ply.hpp>
#include <skewsplat/service.hpp>

#include <CLI11.hpp>
#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <iostream>
#include <limits>

using namespace skewsplat;
using nlohmann::json;

namespace {

// Accepts a number or "inf".
double parse_threshold(const std::string& s) {
    if (s == "inf" || s == "infinity") return std::numeric_limits<double>::infinity();
    if (s == "auto") return -1.0;
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw Error(ErrorCode::InvalidArgument, "not a number: " + s, "tau_z");
    return v;
}

struct TrainFlags {
    std::string tau_z = "auto";
    bool no_densify = false;
    bool no_regularizers = false;
};

void add_train_flags(CLI::App* cmd, TrainConfig& t, TrainFlags& f) {
    cmd->add_option("--iterations", t.iterations, "Training iterations")->capture_default_str();
    cmd->add_option("--lr-position", t.lr_position, "Initial position rate (times scene extent)")->capture_default_str();
    cmd->add_option("--lr-position-final", t.lr_position_final)->capture_default_str();
    cmd->add_option("--lr-scale", t.lr_scale)->capture_default_str();
    cmd->add_option("--lr-rot", t.lr_rot)->capture_default_str();
    cmd->add_option("--lr-opacity", t.lr_opacity)->capture_default_str();
    cmd->add_option("--lr-sh", t.lr_sh)->capture_default_str();
    cmd->add_option("--lr-beta", t.lr_beta)->capture_default_str();
    cmd->add_option("--lr-dir", t.lr_dir, "Negative: same as --lr-beta")->capture_default_str();
    cmd->add_option("--lambda-ssim", t.lambda_ssim)->capture_default_str();
    cmd->add_option("--lambda-beta-reg", t.lambda_beta_reg)->capture_default_str();
    cmd->add_option("--lambda-opacity-reg", t.lambda_opacity_reg)->capture_default_str();
    cmd->add_flag("--symmetric", t.symmetric, "Freeze beta = dir = 0 and tie the opacity pair");
    cmd->add_flag("--no-densify", f.no_densify);
    cmd->add_flag("--no-regularizers", f.no_regularizers, "Set both regularizer weights to 0");
    cmd->add_option("--densify-start", t.densify_start)->capture_default_str();
    cmd->add_option("--densify-end", t.densify_end)->capture_default_str();
    cmd->add_option("--densify-interval", t.densify_interval)->capture_default_str();
    cmd->add_option("--tau-uv", t.tau_uv)->capture_default_str();
    cmd->add_option("--tau-z", f.tau_z, "Depth-gradient threshold: number, 'inf' or 'auto'")->capture_default_str();
    cmd->add_option("--tau-z-percentile", t.tau_z_percentile)->capture_default_str();
    cmd->add_option("--prune-alpha", t.prune_alpha)->capture_default_str();
    cmd->add_option("--split-scale-threshold", t.split_scale_threshold)->capture_default_str();
    cmd->add_option("--max-world-scale", t.max_world_scale)->capture_default_str();
    cmd->add_option("--max-screen-radius", t.max_screen_radius)->capture_default_str();
    cmd->add_option("--max-primitives", t.max_primitives)->capture_default_str();
    cmd->add_option("--opacity-reset-interval", t.opacity_reset_interval)->capture_default_str();
    cmd->add_option("--log-interval", t.log_interval)->capture_default_str();
}

void apply_train_flags(TrainConfig& t, const TrainFlags& f) {
    t.tau_z = parse_threshold(f.tau_z);
    if (f.no_densify) t.densify = false;
    if (f.no_regularizers) t.lambda_beta_reg = t.lambda_opacity_reg = 0.0;
}

void print_log(const TrainLogEntry& e) {
    std::cout << log_entry_json(e) << '\n' << std::flush;
}

json kernels_json(const std::vector<Kernel1D>& ks) {
    json arr = json::array();
    for (const auto& k : ks)
        arr.push_back({{"mu", k.mu}, {"sigma", std::exp(k.log_sigma)}, {"beta", k.beta}, {"weight", k.weight}});
    return arr;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Skew Gaussian splatting: fitting, rendering and a render service"};
    app.require_subcommand(1);
    int threads = 0;
    app.add_option("--threads", threads, "Render threads (0 = all cores); results do not depend on it");

    // fit1d
    auto* c1 = app.add_subcommand("fit1d", "Fit a square wave on [-3, 3] with K skew-normal kernels");
    int k1 = 5, grid1 = 601;
    Fit1DConfig f1;
    bool compare1 = false;
    c1->add_option("-k,--kernels", k1, "Kernel count")->capture_default_str();
    c1->add_option("--grid", grid1, "Sample count")->capture_default_str();
    c1->add_option("--steps", f1.steps)->capture_default_str();
    c1->add_option("--lr", f1.lr)->capture_default_str();
    c1->add_option("--jitter", f1.init_jitter)->capture_default_str();
    c1->add_option("--seed", f1.seed)->capture_default_str();
    bool symmetric1 = false;
    c1->add_flag("--symmetric", symmetric1, "Freeze beta at 0");
    c1->add_flag("--compare", compare1, "Run skew and symmetric from the same init and report both");

    // fit2d
    auto* c2 = app.add_subcommand("fit2d", "Fit one image with primitives on the focal plane");
    std::string image2, out_scene2, out_render2;
    Fit2DConfig f2;
    TrainFlags tf2;
    c2->add_option("--image", image2, "Target PNG")->required();
    c2->add_option("--primitives", f2.n_primitives)->capture_default_str();
    c2->add_option("--seed", f2.seed)->capture_default_str();
    c2->add_option("--out", out_scene2, "Write the fitted scene (PLY)");
    c2->add_option("--render", out_render2, "Write the final render (PNG)");
    add_train_flags(c2, f2.train, tf2);

    // fit
    auto* c3 = app.add_subcommand("fit", "Multi-view fit of a dataset directory (cameras.json + PNGs)");
    std::string data3, out_scene3;
    MultiviewConfig f3;
    TrainFlags tf3;
    c3->add_option("--data", data3, "Dataset directory")->required();
    c3->add_option("--out", out_scene3, "Write the fitted scene (PLY)");
    c3->add_option("--init", f3.n_init, "Initial primitive count")->capture_default_str();
    c3->add_option("--sh-degree", f3.sh_degree)->capture_default_str()->check(CLI::Range(0, kMaxShDegree));
    c3->add_option("--seed", f3.seed)->capture_default_str();
    add_train_flags(c3, f3.train, tf3);

    // render-traj
    auto* c4 = app.add_subcommand("render-traj", "Render every entry of a trajectory file");
    std::string scene4, traj4, out4;
    c4->add_option("--scene", scene4, "Scene PLY")->required();
    c4->add_option("--trajectory", traj4, "Trajectory JSON")->required();
    c4->add_option("--out", out4, "Output directory")->required();

    // metrics
    auto* c5 = app.add_subcommand("metrics", "PSNR and SSIM between two PNGs");
    std::string a5, b5;
    c5->add_option("a", a5)->required();
    c5->add_option("b", b5)->required();

    // serve
    auto* c6 = app.add_subcommand("serve", "WebSocket render service");
    std::string scene6, address6 = "127.0.0.1";
    std::uint16_t port6 = 8080;
    service::ServiceConfig s6;
    c6->add_option("--scene", scene6, "Scene PLY")->required();
    c6->add_option("--address", address6)->capture_default_str();
    c6->add_option("--port", port6)->capture_default_str();
    c6->add_option("--max-width", s6.max_width)->capture_default_str();
    c6->add_option("--max-height", s6.max_height)->capture_default_str();
    c6->add_flag("--png-frames", s6.png_frames, "Send PNG payloads instead of raw RGB8");

    // synth-blobs
    auto* c7 = app.add_subcommand("synth-blobs", "Write the three-blob synthetic dataset");
    std::string out7, scene7;
    int views7 = 8, size7 = 64;
    double radius7 = 4.0, fov7 = 0.6;
    c7->add_option("--out", out7, "Dataset directory")->required();
    c7->add_option("--scene-out", scene7, "Also write the ground-truth scene (PLY)");
    c7->add_option("--views", views7)->capture_default_str();
    c7->add_option("--size", size7)->capture_default_str();
    c7->add_option("--radius", radius7)->capture_default_str();
    c7->add_option("--fov-x", fov7)->capture_default_str();

    CLI11_PARSE(app, argc, argv);

    try {
        RenderConfig render;
        render.threads = threads;

        if (*c1) {
            std::vector<double> xs(grid1), ys(grid1);
            for (int i = 0; i < grid1; ++i) {
                xs[i] = -3.0 + 6.0 * i / (grid1 - 1);
                ys[i] = square_wave(xs[i]);
            }
            const auto init = init_kernels_1d(k1, -3.0, 3.0, ys, f1.seed, f1.init_jitter);
            json out;
            if (compare1) {
                f1.skew = true;
                const auto a = fit1d(xs, ys, init, f1);
                f1.skew = false;
                const auto b = fit1d(xs, ys, init, f1);
                out = {{"mse_skew", a.mse}, {"mse_symmetric", b.mse}, {"ratio", a.mse / b.mse},
                       {"kernels_skew", kernels_json(a.kernels)}, {"kernels_symmetric", kernels_json(b.kernels)}};
            } else {
                f1.skew = !symmetric1;
                const auto r = fit1d(xs, ys, init, f1);
                out = {{"mse", r.mse}, {"initial_mse", r.initial_mse}, {"restarted", r.restarted},
                       {"kernels", kernels_json(r.kernels)}};
            }
            std::cout << out.dump() << '\n';
        } else if (*c2) {
            apply_train_flags(f2.train, tf2);
            f2.render = render;
            const Image target = load_png(image2);
            const auto r = fit2d(target, f2, print_log);
            if (!out_scene2.empty()) save_ply(r.scene, out_scene2);
            if (!out_render2.empty()) save_png(render_image(r.scene, r.camera, render), out_render2);
            std::cout << json{{"final_psnr", r.final_psnr}, {"n_primitives", r.scene.size()}}.dump() << '\n';
        } else if (*c3) {
            apply_train_flags(f3.train, tf3);
            f3.render = render;
            const Dataset data = load_dataset(data3);
            const auto r = fit_multiview(data, f3, print_log);
            if (!out_scene3.empty()) save_ply(r.scene, out_scene3);
            const auto& d = r.densify_totals;
            std::cout << json{{"test_psnr", r.test.psnr},     {"test_ssim", r.test.ssim},
                              {"test_views", r.test.n_views}, {"n_primitives", r.scene.size()},
                              {"n_cloned", d.n_cloned},       {"n_split", d.n_split},
                              {"n_pruned", d.n_pruned},       {"tau_z", std::isfinite(r.tau_z) ? json(r.tau_z) : json("inf")}}
                             .dump()
                      << '\n';
        } else if (*c4) {
            const Scene scene = load_ply(scene4);
            const auto frames = load_camera_file(traj4);
            const auto paths = render_trajectory(scene, frames, out4, render);
            std::cout << json{{"frames", paths.size()}, {"out", out4}}.dump() << '\n';
        } else if (*c5) {
            const auto m = compare(load_png(a5), load_png(b5));
            std::cout << json{{"psnr", m.psnr}, {"ssim", m.ssim}}.dump() << '\n';
        } else if (*c6) {
            s6.render = render;
            service::Server server(load_ply(scene6), s6);
            const auto port = server.start(address6, port6);
            std::cerr << "serving on ws://" << address6 << ':' << port << "/ (health: GET /health)\n";
            server.wait();
            server.stop();
        } else if (*c7) {
            const Scene scene = synthetic_blob_scene();
            write_synthetic_dataset(scene, orbit_cameras(views7, radius7, size7, size7, fov7), out7, render);
            if (!scene7.empty()) save_ply(scene, scene7);
            std::cout << json{{"views", views7}, {"out", out7}}.dump() << '\n';
        }
    } catch (const Error& e) {
        std::cerr << "error: " << e.what();
        if (!e.field().empty()) std::cerr << " [" << e.field() << ']';
        std::cerr << '\n';
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
