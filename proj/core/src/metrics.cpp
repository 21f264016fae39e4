#include <skewsplat/metrics.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <string>

namespace skewsplat {

namespace {

constexpr int kRadius = 5;
constexpr double kC1 = 0.01 * 0.01;
constexpr double kC2 = 0.03 * 0.03;

void check_dims(const Image& a, const Image& b) {
    if (a.width != b.width || a.height != b.height)
        throw Error(ErrorCode::DimensionMismatch,
                    "image sizes differ: " + std::to_string(a.width) + "x" + std::to_string(a.height) + " vs " +
                        std::to_string(b.width) + "x" + std::to_string(b.height));
}

const std::array<double, 2 * kRadius + 1>& window() {
    static const auto w = [] {
        std::array<double, 2 * kRadius + 1> k{};
        double sum = 0.0;
        for (int i = -kRadius; i <= kRadius; ++i) sum += k[i + kRadius] = std::exp(-(i * i) / (2.0 * 1.5 * 1.5));
        for (double& v : k) v /= sum;
        return k;
    }();
    return w;
}

// Separable zero-padded 'same' Gaussian filter of a single-channel plane.
std::vector<double> blur(const std::vector<double>& in, int w, int h) {
    const auto& k = window();
    std::vector<double> tmp(in.size(), 0.0), out(in.size(), 0.0);
    for (int y = 0; y < h; ++y) {
        const double* row = in.data() + std::size_t(y) * w;
        double* dst = tmp.data() + std::size_t(y) * w;
        for (int x = 0; x < w; ++x) {
            const int lo = std::max(-kRadius, -x), hi = std::min(kRadius, w - 1 - x);
            double s = 0.0;
            for (int i = lo; i <= hi; ++i) s += k[i + kRadius] * row[x + i];
            dst[x] = s;
        }
    }
    for (int y = 0; y < h; ++y) {
        const int lo = std::max(-kRadius, -y), hi = std::min(kRadius, h - 1 - y);
        double* dst = out.data() + std::size_t(y) * w;
        for (int i = lo; i <= hi; ++i) {
            const double kv = k[i + kRadius];
            const double* src = tmp.data() + std::size_t(y + i) * w;
            for (int x = 0; x < w; ++x) dst[x] += kv * src[x];
        }
    }
    return out;
}

double ssim_impl(const Image& a, const Image& b, std::vector<double>* d_a) {
    check_dims(a, b);
    const int w = a.width, h = a.height;
    const std::size_t n = a.pixel_count();
    if (n == 0) return 1.0;
    if (d_a) d_a->assign(a.data.size(), 0.0);
    const double inv_total = 1.0 / static_cast<double>(a.data.size());

    double total = 0.0;
    std::vector<double> x(n), y(n), xx(n), yy(n), xy(n);
    for (int c = 0; c < 3; ++c) {
        for (std::size_t p = 0; p < n; ++p) {
            x[p] = a.data[3 * p + c];
            y[p] = b.data[3 * p + c];
            xx[p] = x[p] * x[p];
            yy[p] = y[p] * y[p];
            xy[p] = x[p] * y[p];
        }
        const auto mx = blur(x, w, h), my = blur(y, w, h);
        const auto mxx = blur(xx, w, h), myy = blur(yy, w, h), mxy = blur(xy, w, h);
        std::vector<double> g_mx(n), g_mxx(n), g_mxy(n);
        for (std::size_t p = 0; p < n; ++p) {
            const double ux = mx[p], uy = my[p];
            const double sxx = mxx[p] - ux * ux, syy = myy[p] - uy * uy, sxy = mxy[p] - ux * uy;
            const double A1 = 2.0 * ux * uy + kC1, A2 = 2.0 * sxy + kC2;
            const double B1 = ux * ux + uy * uy + kC1, B2 = sxx + syy + kC2;
            const double s = (A1 * A2) / (B1 * B2);
            total += s;
            if (!d_a) continue;
            const double ds_mxx = -s / B2;
            const double ds_mxy = 2.0 * A1 / (B1 * B2);
            g_mxx[p] = ds_mxx * inv_total;
            g_mxy[p] = ds_mxy * inv_total;
            g_mx[p] = (2.0 * uy * A2 / (B1 * B2) - 2.0 * ux * s / B1 - 2.0 * ux * ds_mxx - uy * ds_mxy) * inv_total;
        }
        if (!d_a) continue;
        // The window is symmetric, so the adjoint of the zero-padded filter is the filter itself.
        const auto t_mx = blur(g_mx, w, h), t_mxx = blur(g_mxx, w, h), t_mxy = blur(g_mxy, w, h);
        for (std::size_t p = 0; p < n; ++p)
            (*d_a)[3 * p + c] = t_mx[p] + 2.0 * x[p] * t_mxx[p] + y[p] * t_mxy[p];
    }
    return total * inv_total;
}

}  // namespace

double mse(const Image& a, const Image& b) {
    check_dims(a, b);
    if (a.data.empty()) return 0.0;
    double s = 0.0;
    for (std::size_t i = 0; i < a.data.size(); ++i) {
        const double d = a.data[i] - b.data[i];
        s += d * d;
    }
    return s / static_cast<double>(a.data.size());
}

double mean_abs_error(const Image& a, const Image& b) {
    check_dims(a, b);
    if (a.data.empty()) return 0.0;
    double s = 0.0;
    for (std::size_t i = 0; i < a.data.size(); ++i) s += std::abs(a.data[i] - b.data[i]);
    return s / static_cast<double>(a.data.size());
}

double psnr(const Image& a, const Image& b) {
    const double m = mse(a, b);
    if (m <= 0.0) return kPsnrCap;
    return std::min(kPsnrCap, 10.0 * std::log10(1.0 / m));
}

double ssim(const Image& a, const Image& b) { return ssim_impl(a, b, nullptr); }

double ssim_with_grad(const Image& a, const Image& b, std::vector<double>& d_a) { return ssim_impl(a, b, &d_a); }

ImageMetrics compare(const Image& a, const Image& b) { return {psnr(a, b), ssim(a, b)}; }

}  // namespace skewsplat
