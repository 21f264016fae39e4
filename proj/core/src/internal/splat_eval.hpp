#pragma once

#include <skewsplat/camera.hpp>
#include <skewsplat/kernel_math.hpp>

#include <cmath>

namespace skewsplat::detail {

/// Per-pixel evaluation of one splat, shared by the forward and backward passes
/// so that both see bit-identical alpha values.
struct SplatSample {
    double dx = 0.0, dy = 0.0;
    double gauss = 0.0;     // G'
    double modulation = 1.0;  // 1 + erf(z)
    double z = 0.0;
    double w = 0.0;
    double erf_w = 0.0;
    double opacity = 0.0;   // o(x)
    double alpha_raw = 0.0;
    double alpha = 0.0;
    bool clamped = false;
};

inline bool sample_splat(const ScreenSplat& s, double px, double py, double alpha_max, SplatSample& out) {
    out.dx = px - s.mean2d.x();
    out.dy = py - s.mean2d.y();
    const double power = kernel::conic_power(out.dx, out.dy, s.conic);
    if (power < 0.0) return false;
    out.gauss = std::exp(-power);
    out.z = kernel::skew_arg(out.dx, out.dy, s.skew2d);
    out.modulation = 1.0 + kernel::erf(out.z);
    out.w = kernel::skew_arg(out.dx, out.dy, s.boundary2d);
    out.erf_w = kernel::erf(out.w);
    const double p1 = s.opacity_pair[0], p2 = s.opacity_pair[1];
    out.opacity = 0.5 * ((p1 + p2) + (p1 - p2) * out.erf_w);
    out.alpha_raw = out.opacity * out.gauss * out.modulation;
    out.clamped = out.alpha_raw > alpha_max;
    out.alpha = out.clamped ? alpha_max : out.alpha_raw;
    return true;
}

}  // namespace skewsplat::detail
