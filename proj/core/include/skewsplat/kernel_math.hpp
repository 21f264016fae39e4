#pragma once

#include <algorithm>
#include <cmath>
#include <utility>

namespace skewsplat::kernel {

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kSqrt2 = 1.41421356237309504880;
inline constexpr double kInvSqrt2 = 0.70710678118654752440;
/// sqrt(2/pi): derivative scale of 1 + erf(t / sqrt(2)).
inline constexpr double kSqrt2OverPi = 0.79788456080286535588;
/// 1/sqrt(2*pi): standard normal density at zero.
inline constexpr double kInvSqrt2Pi = 0.39894228040143267794;

inline constexpr double kAlphaMax = 0.99;
inline constexpr double kAlphaMin = 1.0 / 255.0;
inline constexpr double kSkewClamp = 20.0;

/// Inverse 2D screen covariance [[a, b], [b, c]].
struct Conic {
    double a = 1.0;
    double b = 0.0;
    double c = 1.0;

    bool positive_definite() const noexcept { return a > 0.0 && c > 0.0 && a * c - b * b > 0.0; }
};

/// Screen-space skewness coefficients, in units of 1/px.
struct Skew2D {
    double beta_x = 0.0;
    double beta_y = 0.0;

    double norm() const noexcept { return std::hypot(beta_x, beta_y); }
};

/// Error function. Backed by the C library's piecewise rational approximation
/// (max error well under 1.5e-7; exactly odd, erf(0) == 0).
inline double erf(double x) noexcept { return std::erf(x); }

/// Standard normal CDF.
inline double phi_std(double z) noexcept { return 0.5 * (1.0 + erf(z * kInvSqrt2)); }

/// Exponent of the symmetric falloff: 0.5 (a dx^2 + c dy^2) + b dx dy.
inline double conic_power(double dx, double dy, const Conic& q) noexcept {
    return 0.5 * (q.a * dx * dx + q.c * dy * dy) + q.b * dx * dy;
}

/// Skew modulation argument z = (bx dx + by dy) / sqrt(2).
inline double skew_arg(double dx, double dy, const Skew2D& s) noexcept {
    return (s.beta_x * dx + s.beta_y * dy) * kInvSqrt2;
}

/// Unclamped skew kernel S'(x) = G'(x) (1 + erf(z)).
inline double skew_kernel(double dx, double dy, const Conic& q, const Skew2D& s) noexcept {
    const double g = std::exp(-conic_power(dx, dy, q));
    if (g == 0.0) return 0.0;
    return g * (1.0 + erf(skew_arg(dx, dy, s)));
}

/// Modulated opacity alpha = d * G'(x) * (1 + erf(z)), clamped to [0, alpha_max].
inline double eval_skew_alpha(double dx, double dy, const Conic& q, const Skew2D& s, double d,
                              double alpha_max = kAlphaMax) noexcept {
    return std::clamp(d * skew_kernel(dx, dy, q, s), 0.0, alpha_max);
}

/// (dS'/dbeta_x, dS'/dbeta_y) = sqrt(2/pi) * delta * exp(-0.5(a dx^2 + c dy^2 + 2 z^2) - b dx dy).
inline std::pair<double, double> skew_grad_beta(double dx, double dy, const Conic& q,
                                                const Skew2D& s) noexcept {
    const double z = skew_arg(dx, dy, s);
    const double e = std::exp(-conic_power(dx, dy, q) - z * z);
    return {kSqrt2OverPi * dx * e, kSqrt2OverPi * dy * e};
}

/// Limits |beta| to `bound`, preserving direction.
inline Skew2D clamp_skew(const Skew2D& s, double bound = kSkewClamp) noexcept {
    const double n = s.norm();
    if (n <= bound || n == 0.0) return s;
    const double k = bound / n;
    return {s.beta_x * k, s.beta_y * k};
}

}  // namespace skewsplat::kernel
