#pragma once

#include <skewsplat/camera.hpp>
#include <skewsplat/image.hpp>
#include <skewsplat/optimize.hpp>
#include <skewsplat/raster.hpp>
#include <skewsplat/scene.hpp>

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

namespace skewsplat {

// ---------------------------------------------------------------------------
// 1D mixtures

struct Kernel1D {
    double mu = 0.0;
    double log_sigma = 0.0;
    double beta = 0.0;
    double weight = 1.0;
};

/// w * 2 phi(u) Phi(beta u) / sigma with u = (x - mu) / sigma.
double skew_normal_1d(const Kernel1D& k, double x);
double eval_mixture_1d(const std::vector<Kernel1D>& kernels, double x);

/// Mean squared error of the mixture against samples, with its gradient
/// (one Kernel1D of partials per kernel).
double mixture_mse_1d(const std::vector<Kernel1D>& kernels, const std::vector<double>& xs,
                      const std::vector<double>& ys, std::vector<Kernel1D>* grad = nullptr);

/// 1 where floor(x) is even, 0 elsewhere.
double square_wave(double x);

struct Fit1DConfig {
    int steps = 4000;
    double lr = 0.02;
    bool skew = true;
    std::uint64_t seed = 0;
    /// Position jitter of the initial kernels, as a fraction of their spacing.
    double init_jitter = 0.1;
    /// Optimizes log(weight) so every kernel stays a positive bump.
    bool positive_weights = true;
};

struct Fit1DResult {
    std::vector<Kernel1D> kernels;
    double mse = 0.0;
    double initial_mse = 0.0;
    bool restarted = false;
};

/// K kernels spaced evenly over [lo, hi] (seeded jitter), beta = 0, weights
/// matched to the mean of `ys`.
std::vector<Kernel1D> init_kernels_1d(int count, double lo, double hi, const std::vector<double>& ys,
                                      std::uint64_t seed, double jitter);

/// Adam fit of the mixture. Beta stays 0 when cfg.skew is false. If the loss
/// goes non-finite the run restarts once from `init` with half the step.
Fit1DResult fit1d(const std::vector<double>& xs, const std::vector<double>& ys, const std::vector<Kernel1D>& init,
                  const Fit1DConfig& cfg);

// ---------------------------------------------------------------------------
// Single-view 2D fitting

/// OpenCV camera at the origin looking down +z with fx = fy = width, so the
/// plane z = width maps one world unit to one pixel.
CameraView image_plane_camera(int width, int height);

struct Fit2DConfig {
    int n_primitives = 32;
    TrainConfig train = default_train_config();
    RenderConfig render;
    std::uint64_t seed = 0;

    static TrainConfig default_train_config();
};

struct Fit2DResult {
    Scene scene;
    CameraView camera;
    /// (iteration, PSNR) every log interval.
    std::vector<std::pair<int, double>> psnr_curve;
    double final_psnr = 0.0;
};

/// Primitives on the focal plane at random pixels, isotropic scales from the
/// nearest-neighbour spacing, colors sampled from the target.
Scene init_image_scene(const Image& target, int n_primitives, std::uint64_t seed, int sh_degree = 0);

Fit2DResult fit2d(const Image& target, const Fit2DConfig& cfg,
                  const std::function<void(const TrainLogEntry&)>& log = {});

// ---------------------------------------------------------------------------
// Multi-view datasets and trajectories

/// One entry of a camera / trajectory file.
struct CameraFrame {
    std::string file;
    CameraView view;
};

/// {"frames": [{"file", "c2w" (16 row-major), "convention", "fov_x",
/// "width", "height"}, ...]}. Errors name the offending entry index.
std::vector<CameraFrame> parse_camera_json(const std::string& text);
std::vector<CameraFrame> load_camera_file(const std::filesystem::path& path);
std::string camera_json(const std::vector<CameraFrame>& frames);
void save_camera_file(const std::vector<CameraFrame>& frames, const std::filesystem::path& path);

struct Dataset {
    std::vector<TrainView> train;
    std::vector<TrainView> test;
};

/// Reads `dir/cameras.json` and its PNGs; every 8th image (index % 8 == 0)
/// is held out for testing.
Dataset load_dataset(const std::filesystem::path& dir);

/// Splits views with the every-8th rule.
Dataset split_views(std::vector<TrainView> views);

/// Test-split PSNR / SSIM averages.
struct EvalResult {
    double psnr = 0.0;
    double ssim = 0.0;
    std::size_t n_views = 0;
};
EvalResult evaluate(const Scene& scene, const std::vector<TrainView>& views, const RenderConfig& render);

/// Three colored skew blobs around the origin.
Scene synthetic_blob_scene();

/// `count` cameras on a tilted orbit of radius `radius` looking at the origin.
std::vector<CameraView> orbit_cameras(int count, double radius, int width, int height, double fov_x);

/// Renders `scene` from each camera into dir (frame_XXXXX.png + cameras.json).
void write_synthetic_dataset(const Scene& scene, const std::vector<CameraView>& cams,
                             const std::filesystem::path& dir, const RenderConfig& render = {});

struct MultiviewConfig {
    int n_init = 200;
    int sh_degree = 0;
    TrainConfig train = default_train_config();
    RenderConfig render;
    std::uint64_t seed = 0;

    static TrainConfig default_train_config();
};

struct MultiviewResult {
    Scene scene;
    EvalResult test;
    DensifyReport densify_totals;
    double tau_z = 0.0;
};

/// Random init in the bounding box of the camera targets, then full training.
Scene init_multiview_scene(const Dataset& data, int n_init, std::uint64_t seed, int sh_degree);

/// Extent used for position learning rates: 1.1 x max camera distance from
/// the camera centroid.
double camera_extent(const std::vector<TrainView>& views);

MultiviewResult fit_multiview(const Dataset& data, const MultiviewConfig& cfg,
                              const std::function<void(const TrainLogEntry&)>& log = {});

/// Renders every trajectory entry to out_dir/frame_XXXXX.png; returns the paths.
std::vector<std::filesystem::path> render_trajectory(const Scene& scene, const std::vector<CameraFrame>& frames,
                                                     const std::filesystem::path& out_dir,
                                                     const RenderConfig& render = {});

/// JSON line {iteration, loss, psnr, n_primitives, n_cloned, n_split, n_pruned}.
std::string log_entry_json(const TrainLogEntry& e);

}  // namespace skewsplat
