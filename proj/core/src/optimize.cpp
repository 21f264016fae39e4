#include <skewsplat/metrics.hpp>
#include <skewsplat/optimize.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>

namespace skewsplat {

void adam_update(std::span<double> params, std::span<const double> grads, std::span<double> m, std::span<double> v,
                 std::span<const double> lr, int step, double beta1, double beta2, double eps) {
    const double c1 = 1.0 - std::pow(beta1, step);
    const double c2 = 1.0 - std::pow(beta2, step);
    for (std::size_t k = 0; k < params.size(); ++k) {
        m[k] = beta1 * m[k] + (1.0 - beta1) * grads[k];
        v[k] = beta2 * v[k] + (1.0 - beta2) * grads[k] * grads[k];
        const double mh = m[k] / c1;
        const double vh = v[k] / c2;
        params[k] -= lr[k] * mh / (std::sqrt(vh) + eps);
    }
}

LossValue photometric_loss(const Image& rendered, const Image& target, double lambda_ssim,
                           std::vector<double>& d_pixels) {
    LossValue out;
    out.l1 = mean_abs_error(rendered, target);
    const std::size_t n = rendered.data.size();
    d_pixels.assign(n, 0.0);
    const double w1 = (1.0 - lambda_ssim) / static_cast<double>(std::max<std::size_t>(n, 1));
    for (std::size_t i = 0; i < n; ++i) {
        const double d = rendered.data[i] - target.data[i];
        d_pixels[i] = d > 0.0 ? w1 : (d < 0.0 ? -w1 : 0.0);
    }
    if (lambda_ssim != 0.0) {
        std::vector<double> d_ssim;
        out.ssim = ssim_with_grad(rendered, target, d_ssim);
        for (std::size_t i = 0; i < n; ++i) d_pixels[i] -= lambda_ssim * d_ssim[i];
    }
    out.total = (1.0 - lambda_ssim) * out.l1 + lambda_ssim * (1.0 - out.ssim);
    return out;
}

double add_regularizers(const Scene& scene, const TrainConfig& cfg, std::vector<PrimitiveGrad>& grads) {
    if (cfg.symmetric) return 0.0;
    double value = 0.0;
    for (std::size_t i = 0; i < scene.size(); ++i) {
        const SkewGaussian& g = scene.primitives[i];
        if (cfg.lambda_beta_reg != 0.0) {
            value += cfg.lambda_beta_reg * g.beta.squaredNorm();
            grads[i].d_beta += 2.0 * cfg.lambda_beta_reg * g.beta;
        }
        if (cfg.lambda_opacity_reg != 0.0) {
            const double s1 = sigmoid(g.opacity_logits[0]), s2 = sigmoid(g.opacity_logits[1]);
            const double diff = s1 - s2;
            value += cfg.lambda_opacity_reg * std::abs(diff);
            const double sign = diff > 0.0 ? 1.0 : (diff < 0.0 ? -1.0 : 0.0);
            grads[i].d_opacity_logits[0] += cfg.lambda_opacity_reg * sign * s1 * (1.0 - s1);
            grads[i].d_opacity_logits[1] -= cfg.lambda_opacity_reg * sign * s2 * (1.0 - s2);
        }
    }
    return value;
}

SceneOptimizer::SceneOptimizer(const TrainConfig& cfg, int sh_degree, std::size_t n_primitives)
    : cfg_(cfg), sh_degree_(sh_degree), n_params_(param_count(sh_degree)) {
    m_.assign(n_primitives * n_params_, 0.0);
    v_.assign(n_primitives * n_params_, 0.0);
    lr_template_.resize(n_params_);
    const double lr_dir = cfg.lr_dir < 0.0 ? cfg.lr_beta : cfg.lr_dir;
    for (int k = 0; k < n_params_; ++k) {
        switch (param_group(k, sh_degree)) {
            case ParamGroup::Position: lr_template_[k] = 0.0; break;  // set per step
            case ParamGroup::Scale: lr_template_[k] = cfg.lr_scale; break;
            case ParamGroup::Rotation: lr_template_[k] = cfg.lr_rot; break;
            case ParamGroup::ShDc: lr_template_[k] = cfg.lr_sh; break;
            case ParamGroup::ShRest: lr_template_[k] = cfg.lr_sh / 20.0; break;
            case ParamGroup::Opacity: lr_template_[k] = cfg.lr_opacity; break;
            case ParamGroup::Beta: lr_template_[k] = cfg.lr_beta; break;
            case ParamGroup::Dir: lr_template_[k] = lr_dir; break;
        }
    }
}

double SceneOptimizer::position_lr(int iteration) const {
    const double init = cfg_.lr_position * cfg_.spatial_scale;
    if (cfg_.lr_position_final <= 0.0 || cfg_.iterations <= 1) return init;
    const double final_lr = cfg_.lr_position_final * cfg_.spatial_scale;
    const double t = std::clamp(static_cast<double>(iteration) / cfg_.iterations, 0.0, 1.0);
    return std::exp(std::log(init) * (1.0 - t) + std::log(final_lr) * t);
}

void SceneOptimizer::step(Scene& scene, const std::vector<PrimitiveGrad>& grads, int iteration) {
    if (grads.size() != scene.size() || m_.size() != scene.size() * n_params_)
        throw Error(ErrorCode::DimensionMismatch, "optimizer state, gradients and scene sizes differ");
    ++t_;
    std::vector<double> lr = lr_template_;
    const double pos_lr = position_lr(iteration);
    for (int k = 0; k < 3; ++k) lr[k] = pos_lr;
    const int opacity_begin = 10 + 3 * sh_coeff_count(sh_degree_);
    if (cfg_.symmetric)
        for (int k = opacity_begin + 1; k < n_params_; ++k) lr[k] = 0.0;

    std::vector<double> params(n_params_), g(n_params_);
    for (std::size_t i = 0; i < scene.size(); ++i) {
        if (!grads[i].all_finite()) {
            ++skipped_;
            continue;
        }
        SkewGaussian& prim = scene.primitives[i];
        pack_params(prim, sh_degree_, params);
        pack_grad(grads[i], sh_degree_, g);
        if (cfg_.symmetric) {
            // Tied logits: l1 = l2 = l, dL/dl = dL/dl1 + dL/dl2.
            g[opacity_begin] += g[opacity_begin + 1];
            for (int k = opacity_begin + 1; k < n_params_; ++k) g[k] = 0.0;
        }
        const std::size_t off = i * n_params_;
        adam_update(params, g, std::span(m_).subspan(off, n_params_), std::span(v_).subspan(off, n_params_), lr, t_,
                    cfg_.adam_beta1, cfg_.adam_beta2, cfg_.adam_eps);
        unpack_params(params, sh_degree_, prim);
        prim.rot /= prim.rot.norm();
        if (cfg_.symmetric) prim.opacity_logits[1] = prim.opacity_logits[0];
    }
}

void SceneOptimizer::remap(const std::vector<int>& source) {
    std::vector<double> m(source.size() * n_params_, 0.0), v(source.size() * n_params_, 0.0);
    for (std::size_t i = 0; i < source.size(); ++i) {
        if (source[i] < 0) continue;
        std::copy_n(m_.begin() + std::ptrdiff_t(source[i]) * n_params_, n_params_, m.begin() + std::ptrdiff_t(i) * n_params_);
        std::copy_n(v_.begin() + std::ptrdiff_t(source[i]) * n_params_, n_params_, v.begin() + std::ptrdiff_t(i) * n_params_);
    }
    m_ = std::move(m);
    v_ = std::move(v);
}

void SceneOptimizer::reset_opacity_state() {
    const int begin = 10 + 3 * sh_coeff_count(sh_degree_);
    for (std::size_t off = 0; off < m_.size(); off += n_params_)
        for (int k = begin; k < begin + 2; ++k) m_[off + k] = v_[off + k] = 0.0;
}

void DensifyStats::resize(std::size_t n) {
    uv_sum.assign(n, 0.0);
    uv_count.assign(n, 0);
    z_max.assign(n, 0.0);
    max_radius.assign(n, 0.0);
    mu_grad_sum.assign(n, Vec3::Zero());
}

void DensifyStats::reset() { resize(uv_sum.size()); }

void DensifyStats::accumulate(const FrameBundle& frame, const GradientBundle& grads) {
    if (grads.g_uv.size() != uv_sum.size())
        throw Error(ErrorCode::DimensionMismatch, "densify stats and gradient bundle sizes differ");
    for (std::size_t i = 0; i < uv_sum.size(); ++i) {
        if (!grads.visible[i]) continue;
        uv_sum[i] += grads.g_uv[i];
        uv_count[i] += 1;
        z_max[i] = std::max(z_max[i], grads.g_z[i]);
        mu_grad_sum[i] += grads.grads[i].d_mu;
    }
    for (std::size_t j = 0; j < frame.visible.size(); ++j) {
        const std::uint32_t i = frame.visible[j];
        if (i < max_radius.size()) max_radius[i] = std::max(max_radius[i], frame.splats[j].radius);
    }
}

double depth_threshold_percentile(const DensifyStats& stats, double percentile) {
    std::vector<double> seen;
    for (std::size_t i = 0; i < stats.z_max.size(); ++i)
        if (stats.uv_count[i] > 0) seen.push_back(stats.z_max[i]);
    if (seen.empty()) return std::numeric_limits<double>::infinity();
    std::sort(seen.begin(), seen.end());
    const double rank = std::ceil(std::clamp(percentile, 0.0, 1.0) * seen.size());
    const std::size_t idx = static_cast<std::size_t>(std::max(rank, 1.0)) - 1;
    return seen[idx];
}

namespace {

double corrected_clone_logit(double l) {
    // Two stacked copies of opacity a' give 1 - (1 - a')^2 = a at the peak.
    const double a = sigmoid(l);
    const double ac = 1.0 - std::sqrt(1.0 - a);
    return logit(std::clamp(ac, 1e-12, 1.0 - 1e-12));
}

}  // namespace

DensifyReport densify_and_prune(Scene& scene, const DensifyStats& stats, const TrainConfig& cfg, double tau_z,
                                double clone_offset) {
    const std::size_t n = scene.size();
    if (stats.uv_sum.size() != n) throw Error(ErrorCode::DimensionMismatch, "densify stats do not match the scene");

    DensifyReport rep;
    rep.flagged.assign(n, 0);
    const double split_threshold = cfg.split_scale_threshold * cfg.spatial_scale;

    struct Entry {
        SkewGaussian g;
        int source;
        bool from_split;
    };
    std::vector<Entry> out;
    out.reserve(n);
    std::vector<Entry> added;

    for (std::size_t i = 0; i < n; ++i) {
        const SkewGaussian& g = scene.primitives[i];
        const bool seen = stats.uv_count[i] > 0;
        const bool by_uv = seen && stats.uv_mean(i) > cfg.tau_uv;
        const bool by_z = seen && stats.z_max[i] > tau_z;
        rep.flagged_uv += by_uv;
        rep.flagged_z += by_z;
        const bool grow = (by_uv || by_z) &&
                          (cfg.max_primitives == 0 || out.size() + added.size() + n - i < cfg.max_primitives);
        if (!(by_uv || by_z)) {
            out.push_back({g, static_cast<int>(i), false});
            continue;
        }
        rep.flagged[i] = 1;
        if (!grow) {
            out.push_back({g, static_cast<int>(i), false});
            continue;
        }
        const Vec3 scale = g.log_scale.array().exp().matrix();
        Eigen::Index axis_idx = 0;
        const double smax = scale.maxCoeff(&axis_idx);
        if (smax <= split_threshold) {
            SkewGaussian keep = g;
            keep.opacity_logits = Vec2(corrected_clone_logit(g.opacity_logits[0]),
                                       corrected_clone_logit(g.opacity_logits[1]));
            SkewGaussian copy = keep;
            if (clone_offset != 0.0 && stats.uv_count[i] > 0)
                copy.mu -= clone_offset * stats.mu_grad_sum[i] / stats.uv_count[i];
            out.push_back({keep, static_cast<int>(i), false});
            added.push_back({copy, -1, false});
            ++rep.n_cloned;
        } else {
            const Vec3 axis = rotation_matrix(g.rot).col(axis_idx);
            const double side = g.beta.dot(axis);
            const double hi = std::max(g.opacity_logits[0], g.opacity_logits[1]);
            const double lo = std::min(g.opacity_logits[0], g.opacity_logits[1]);
            for (int sgn : {1, -1}) {
                SkewGaussian child = g;
                child.mu = g.mu + sgn * 0.5 * smax * axis;
                child.log_scale = g.log_scale.array() - std::log(1.6);
                if (side != 0.0) {
                    const double l = (side * sgn > 0.0) ? hi : lo;
                    child.opacity_logits = Vec2(l, l);
                }
                added.push_back({child, -1, true});
            }
            ++rep.n_split;
        }
    }
    for (auto& e : added) out.push_back(std::move(e));

    scene.primitives.clear();
    rep.source.clear();
    const double max_world = cfg.max_world_scale * cfg.spatial_scale;
    for (const Entry& e : out) {
        const SkewGaussian& g = e.g;
        const double a_max = std::max(sigmoid(g.opacity_logits[0]), sigmoid(g.opacity_logits[1]));
        bool prune = a_max < cfg.prune_alpha;
        if (max_world > 0.0 && g.log_scale.array().exp().maxCoeff() > max_world) prune = true;
        if (cfg.max_screen_radius > 0.0 && e.source >= 0 && stats.max_radius[e.source] > cfg.max_screen_radius)
            prune = true;
        if (prune) {
            ++rep.n_pruned;
            continue;
        }
        scene.primitives.push_back(g);
        rep.source.push_back(e.source);
    }
    return rep;
}

Trainer::Trainer(Scene scene, std::vector<TrainView> views, TrainConfig cfg, RenderConfig render, std::uint64_t seed)
    : scene_(std::move(scene)),
      views_(std::move(views)),
      cfg_(cfg),
      render_(render),
      opt_(cfg, scene_.sh_degree, scene_.size()),
      rng_(seed),
      tau_z_(cfg.tau_z) {
    validate(scene_);
    if (views_.empty()) throw Error(ErrorCode::InvalidArgument, "training needs at least one view", "views");
    for (std::size_t i = 0; i < views_.size(); ++i) {
        const auto& v = views_[i];
        if (v.image.width != v.camera.width || v.image.height != v.camera.height)
            throw Error(ErrorCode::DimensionMismatch, "view " + std::to_string(i) + " image size differs from camera",
                        "views[" + std::to_string(i) + "]");
    }
    stats_.resize(scene_.size());
    order_.resize(views_.size());
    std::iota(order_.begin(), order_.end(), 0);
    order_pos_ = order_.size();
}

LossValue Trainer::step() {
    if (cfg_.opacity_reset_interval > 0 && iteration_ > 0 && iteration_ % cfg_.opacity_reset_interval == 0 &&
        iteration_ < cfg_.densify_end) {
        const double cap = logit(cfg_.opacity_reset_value);
        for (auto& g : scene_.primitives)
            for (int k = 0; k < 2; ++k) g.opacity_logits[k] = std::min(g.opacity_logits[k], cap);
        opt_.reset_opacity_state();
    }

    if (order_pos_ >= order_.size()) {
        std::shuffle(order_.begin(), order_.end(), rng_);
        order_pos_ = 0;
    }
    const TrainView& view = views_[order_[order_pos_++]];

    const FrameBundle frame = render_forward(scene_, view.camera, render_);
    std::vector<double> d_pixels;
    LossValue loss = photometric_loss(frame.color, view.image, cfg_.lambda_ssim, d_pixels);
    GradientBundle grads = render_backward(scene_, view.camera, frame, d_pixels, render_);
    loss.regularizer = add_regularizers(scene_, cfg_, grads.grads);
    loss.total += loss.regularizer;

    const bool collecting = cfg_.densify && iteration_ < cfg_.densify_end;
    if (collecting) stats_.accumulate(frame, grads);
    opt_.step(scene_, grads.grads, iteration_);
    ++iteration_;

    interval_loss_ += loss.total;
    interval_psnr_ += psnr(frame.color, view.image);
    ++interval_count_;

    if (collecting && iteration_ >= cfg_.densify_start && cfg_.densify_interval > 0 &&
        iteration_ % cfg_.densify_interval == 0)
        densify_step();
    return loss;
}

void Trainer::densify_step() {
    if (tau_z_ < 0.0) tau_z_ = depth_threshold_percentile(stats_, cfg_.tau_z_percentile);
    const DensifyReport rep = densify_and_prune(scene_, stats_, cfg_, tau_z_, opt_.position_lr(iteration_));
    opt_.remap(rep.source);
    stats_.resize(scene_.size());
    for (DensifyReport* r : {&totals_, &interval_}) {
        r->n_cloned += rep.n_cloned;
        r->n_split += rep.n_split;
        r->n_pruned += rep.n_pruned;
        r->flagged_uv += rep.flagged_uv;
        r->flagged_z += rep.flagged_z;
    }
}

void Trainer::run(const std::function<void(const TrainLogEntry&)>& log) {
    auto emit = [&] {
        if (!log || interval_count_ == 0) return;
        TrainLogEntry e;
        e.iteration = iteration_;
        e.loss = interval_loss_ / interval_count_;
        e.psnr = interval_psnr_ / interval_count_;
        e.n_primitives = scene_.size();
        e.n_cloned = interval_.n_cloned;
        e.n_split = interval_.n_split;
        e.n_pruned = interval_.n_pruned;
        log(e);
        interval_ = DensifyReport{};
        interval_loss_ = interval_psnr_ = 0.0;
        interval_count_ = 0;
    };
    while (iteration_ < cfg_.iterations) {
        step();
        if (cfg_.log_interval > 0 && iteration_ % cfg_.log_interval == 0) emit();
    }
    emit();
}

}  // namespace skewsplat
