#pragma once

#include <skewsplat/camera.hpp>
#include <skewsplat/image.hpp>
#include <skewsplat/raster.hpp>
#include <skewsplat/scene.hpp>

#include <cstdint>
#include <functional>
#include <limits>
#include <random>
#include <span>
#include <vector>

namespace skewsplat {

struct TrainConfig {
    int iterations = 3000;

    /// Position learning rate in scene units, multiplied by `spatial_scale`;
    /// decays exponentially to lr_position_final over `iterations`.
    double lr_position = 1.6e-4;
    double lr_position_final = 1.6e-6;
    double lr_scale = 5e-3;
    double lr_rot = 1e-3;
    double lr_opacity = 5e-2;
    /// DC color rate; higher SH bands use lr_sh / 20.
    double lr_sh = 2.5e-3;
    double lr_beta = 1e-4;
    /// Boundary direction rate; negative means "same as lr_beta".
    double lr_dir = -1.0;
    /// Scene extent; scales the position rate and the split threshold.
    double spatial_scale = 1.0;

    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_eps = 1e-15;

    double lambda_ssim = 0.2;
    double lambda_beta_reg = 1e-4;
    double lambda_opacity_reg = 1e-3;

    /// Freezes beta = dir = 0 and ties the two opacity logits (symmetric model).
    bool symmetric = false;

    bool densify = true;
    int densify_start = 500;
    int densify_end = 15000;
    int densify_interval = 100;
    double tau_uv = 1e-3;
    /// Depth-gradient threshold. Negative: set once to the `tau_z_percentile`
    /// of observed g_z at the first densification. +inf disables the criterion.
    double tau_z = -1.0;
    double tau_z_percentile = 0.9;
    double prune_alpha = 0.005;
    /// Split (rather than clone) when max scale exceeds this times spatial_scale.
    double split_scale_threshold = 0.01;
    /// Prune when max world scale exceeds this times spatial_scale (0 = off).
    double max_world_scale = 0.0;
    /// Prune when the screen radius in any view exceeded this many px (0 = off).
    double max_screen_radius = 0.0;
    std::size_t max_primitives = 0;
    /// Reset opacities to `opacity_reset_value` every this many iterations (0 = never).
    int opacity_reset_interval = 0;
    double opacity_reset_value = 0.01;

    int log_interval = 100;
};

/// Bias-corrected Adam on a flat parameter block.
void adam_update(std::span<double> params, std::span<const double> grads, std::span<double> m,
                 std::span<double> v, std::span<const double> lr, int step, double beta1, double beta2, double eps);

struct LossValue {
    double total = 0.0;
    double l1 = 0.0;
    double ssim = 1.0;
    double regularizer = 0.0;
};

/// (1 - lambda_ssim) L1 + lambda_ssim (1 - SSIM), with dL/dpixels.
LossValue photometric_loss(const Image& rendered, const Image& target, double lambda_ssim,
                           std::vector<double>& d_pixels);

/// lambda_beta_reg sum |beta|^2 + lambda_opacity_reg sum |sigmoid(l1) - sigmoid(l2)|.
/// Adds the gradients into `grads` and returns the value.
double add_regularizers(const Scene& scene, const TrainConfig& cfg, std::vector<PrimitiveGrad>& grads);

/// Per-primitive Adam state with per-group learning rates.
class SceneOptimizer {
public:
    SceneOptimizer(const TrainConfig& cfg, int sh_degree, std::size_t n_primitives);

    /// One update; quaternions are renormalized afterwards. Primitives with a
    /// non-finite gradient are left untouched and counted.
    void step(Scene& scene, const std::vector<PrimitiveGrad>& grads, int iteration);

    /// Rebuilds state after densification: entry i of the new scene inherits
    /// the moments of old primitive source[i], or starts fresh if source[i] < 0.
    void remap(const std::vector<int>& source);

    /// Zeroes the opacity moments (used after an opacity reset).
    void reset_opacity_state();

    double position_lr(int iteration) const;
    std::uint64_t skipped_updates() const noexcept { return skipped_; }
    int steps() const noexcept { return t_; }

private:
    TrainConfig cfg_;
    int sh_degree_;
    int n_params_;
    std::vector<double> m_, v_;
    std::vector<double> lr_template_;
    int t_ = 0;
    std::uint64_t skipped_ = 0;
};

/// Densification statistics accumulated over views until reset.
struct DensifyStats {
    std::vector<double> uv_sum;
    std::vector<int> uv_count;
    std::vector<double> z_max;
    std::vector<double> max_radius;
    /// Sum of world-space position gradients (direction for clone offsets).
    std::vector<Vec3> mu_grad_sum;

    void resize(std::size_t n);
    void reset();
    void accumulate(const FrameBundle& frame, const GradientBundle& grads);
    double uv_mean(std::size_t i) const { return uv_count[i] > 0 ? uv_sum[i] / uv_count[i] : 0.0; }
};

struct DensifyReport {
    int n_cloned = 0;
    int n_split = 0;
    int n_pruned = 0;
    int flagged_uv = 0;
    int flagged_z = 0;
    /// Flag set (by old index) for inspection.
    std::vector<std::uint8_t> flagged;
    /// For each new primitive, the old primitive it came from.
    std::vector<int> source;
};

/// Clone/split flagged primitives and prune transparent or oversized ones.
/// `clone_offset` scales the clone's step along -mean position gradient
/// (0 keeps the copy in place).
DensifyReport densify_and_prune(Scene& scene, const DensifyStats& stats, const TrainConfig& cfg, double tau_z,
                                double clone_offset);

/// The tau_z percentile rule over primitives seen at least once.
double depth_threshold_percentile(const DensifyStats& stats, double percentile);

struct TrainView {
    CameraView camera;
    Image image;
};

struct TrainLogEntry {
    int iteration = 0;
    double loss = 0.0;
    double psnr = 0.0;
    std::size_t n_primitives = 0;
    int n_cloned = 0;
    int n_split = 0;
    int n_pruned = 0;
};

/// Single-writer training loop: render, loss, backward, Adam, densify.
class Trainer {
public:
    Trainer(Scene scene, std::vector<TrainView> views, TrainConfig cfg, RenderConfig render, std::uint64_t seed);

    /// Runs one iteration; returns the loss of that iteration.
    LossValue step();

    /// Runs until cfg.iterations, invoking `log` every log_interval iterations
    /// and at the end.
    void run(const std::function<void(const TrainLogEntry&)>& log = {});

    const Scene& scene() const noexcept { return scene_; }
    int iteration() const noexcept { return iteration_; }
    double tau_z() const noexcept { return tau_z_; }
    const TrainConfig& config() const noexcept { return cfg_; }
    std::uint64_t skipped_updates() const noexcept { return opt_.skipped_updates(); }
    /// Densification totals since construction.
    const DensifyReport& densify_totals() const noexcept { return totals_; }

private:
    void densify_step();

    Scene scene_;
    std::vector<TrainView> views_;
    TrainConfig cfg_;
    RenderConfig render_;
    SceneOptimizer opt_;
    DensifyStats stats_;
    std::mt19937_64 rng_;
    std::vector<std::size_t> order_;
    std::size_t order_pos_ = 0;
    int iteration_ = 0;
    double tau_z_;
    DensifyReport totals_;
    DensifyReport interval_;
    double interval_loss_ = 0.0;
    double interval_psnr_ = 0.0;
    int interval_count_ = 0;
};

}  // namespace skewsplat
