#include <skewsplat/fit.hpp>
#include <skewsplat/kernel_math.hpp>

#include <cmath>
#include <random>

namespace skewsplat {

namespace {

constexpr int kFields = 4;

double phi(double u) { return kernel::kInvSqrt2Pi * std::exp(-0.5 * u * u); }

}  // namespace

double skew_normal_1d(const Kernel1D& k, double x) {
    const double sigma = std::exp(k.log_sigma);
    const double u = (x - k.mu) / sigma;
    return k.weight * 2.0 * phi(u) * kernel::phi_std(k.beta * u) / sigma;
}

double eval_mixture_1d(const std::vector<Kernel1D>& kernels, double x) {
    double f = 0.0;
    for (const auto& k : kernels) f += skew_normal_1d(k, x);
    return f;
}

double square_wave(double x) { return (static_cast<long long>(std::floor(x)) % 2 == 0) ? 1.0 : 0.0; }

double mixture_mse_1d(const std::vector<Kernel1D>& kernels, const std::vector<double>& xs,
                      const std::vector<double>& ys, std::vector<Kernel1D>* grad) {
    if (xs.size() != ys.size() || xs.empty())
        throw Error(ErrorCode::DimensionMismatch, "sample grid and values differ in size");
    if (grad) grad->assign(kernels.size(), Kernel1D{0.0, 0.0, 0.0, 0.0});
    const double inv_n = 1.0 / static_cast<double>(xs.size());
    double err = 0.0;
    for (std::size_t s = 0; s < xs.size(); ++s) {
        const double r = eval_mixture_1d(kernels, xs[s]) - ys[s];
        err += r * r;
        if (!grad) continue;
        const double dr = 2.0 * r * inv_n;
        for (std::size_t i = 0; i < kernels.size(); ++i) {
            const Kernel1D& k = kernels[i];
            const double sigma = std::exp(k.log_sigma);
            const double u = (xs[s] - k.mu) / sigma;
            const double pu = phi(u), cdf = kernel::phi_std(k.beta * u), pbu = phi(k.beta * u);
            const double base = 2.0 * pu * cdf / sigma;  // g without the weight
            const double dg_du = 2.0 / sigma * (-u * pu * cdf + pu * k.beta * pbu);
            Kernel1D& g = (*grad)[i];
            g.weight += dr * base;
            g.mu += dr * k.weight * dg_du * (-1.0 / sigma);
            g.log_sigma += dr * k.weight * (-base - u * dg_du);
            g.beta += dr * k.weight * 2.0 / sigma * pu * pbu * u;
        }
    }
    return err * inv_n;
}

std::vector<Kernel1D> init_kernels_1d(int count, double lo, double hi, const std::vector<double>& ys,
                                      std::uint64_t seed, double jitter) {
    if (count < 1) throw Error(ErrorCode::InvalidArgument, "need at least one kernel", "K");
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    double mean = 0.0;
    for (double y : ys) mean += y;
    mean /= std::max<std::size_t>(ys.size(), 1);
    const double spacing = (hi - lo) / count;
    std::vector<Kernel1D> out(count);
    for (int i = 0; i < count; ++i) {
        out[i].mu = lo + (i + 0.5) * spacing + jitter * spacing * u(rng);
        out[i].log_sigma = std::log(0.5 * spacing);
        out[i].beta = 0.0;
        out[i].weight = mean * spacing;
    }
    return out;
}

namespace {

Fit1DResult run_fit1d(const std::vector<double>& xs, const std::vector<double>& ys,
                      const std::vector<Kernel1D>& init, const Fit1DConfig& cfg, double lr, bool& diverged) {
    Fit1DResult res;
    res.kernels = init;
    const std::size_t n = init.size() * kFields;
    std::vector<double> m(n, 0.0), v(n, 0.0), params(n), grads(n), rates(n, lr);
    std::vector<Kernel1D> g;
    res.initial_mse = mixture_mse_1d(res.kernels, xs, ys);
    diverged = false;
    for (int step = 1; step <= cfg.steps; ++step) {
        const double e = mixture_mse_1d(res.kernels, xs, ys, &g);
        if (!std::isfinite(e)) {
            diverged = true;
            return res;
        }
        for (std::size_t i = 0; i < init.size(); ++i) {
            const Kernel1D& k = res.kernels[i];
            params[i * kFields + 0] = k.mu;
            params[i * kFields + 1] = k.log_sigma;
            params[i * kFields + 2] = k.beta;
            params[i * kFields + 3] = cfg.positive_weights ? std::log(k.weight) : k.weight;
            grads[i * kFields + 0] = g[i].mu;
            grads[i * kFields + 1] = g[i].log_sigma;
            grads[i * kFields + 2] = cfg.skew ? g[i].beta : 0.0;
            grads[i * kFields + 3] = cfg.positive_weights ? g[i].weight * k.weight : g[i].weight;
        }
        adam_update(params, grads, m, v, rates, step, 0.9, 0.999, 1e-15);
        for (std::size_t i = 0; i < init.size(); ++i) {
            Kernel1D& k = res.kernels[i];
            k.mu = params[i * kFields + 0];
            k.log_sigma = params[i * kFields + 1];
            k.beta = cfg.skew ? params[i * kFields + 2] : 0.0;
            k.weight = cfg.positive_weights ? std::exp(params[i * kFields + 3]) : params[i * kFields + 3];
        }
    }
    res.mse = mixture_mse_1d(res.kernels, xs, ys);
    diverged = !std::isfinite(res.mse);
    return res;
}

}  // namespace

Fit1DResult fit1d(const std::vector<double>& xs, const std::vector<double>& ys, const std::vector<Kernel1D>& init,
                  const Fit1DConfig& cfg) {
    if (init.empty()) throw Error(ErrorCode::InvalidArgument, "need at least one kernel", "K");
    if (xs.size() < 64) throw Error(ErrorCode::InvalidArgument, "the sample grid needs at least 64 points", "grid");
    bool diverged = false;
    Fit1DResult res = run_fit1d(xs, ys, init, cfg, cfg.lr, diverged);
    if (diverged) {
        res = run_fit1d(xs, ys, init, cfg, 0.5 * cfg.lr, diverged);
        res.restarted = true;
        if (diverged) throw Error(ErrorCode::Divergence, "1D fit diverged after restarting with half the step");
    }
    return res;
}

}  // namespace skewsplat
