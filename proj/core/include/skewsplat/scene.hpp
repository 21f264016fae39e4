#pragma once

#include <skewsplat/types.hpp>

#include <array>
#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

namespace skewsplat {

inline constexpr int kMaxShDegree = 3;
inline constexpr int kMaxShCoeffs = 16;

constexpr int sh_coeff_count(int degree) { return (degree + 1) * (degree + 1); }

/// One skew-Gaussian primitive in its raw (pre-activation) parameterization.
///
/// Scales pass through exp, opacities through sigmoid; beta and dir are used as
/// stored. `rot` is a (w, x, y, z) quaternion, renormalized after every update.
/// `dir` orients the boundary between the two base opacities; the boundary
/// normal is beta + dir.
struct SkewGaussian {
    Vec3 mu = Vec3::Zero();
    Vec3 log_scale = Vec3::Zero();
    Vec4 rot = Vec4(1.0, 0.0, 0.0, 0.0);
    std::array<Vec3, kMaxShCoeffs> sh = make_zero_sh();
    Vec2 opacity_logits = Vec2::Zero();
    Vec3 beta = Vec3::Zero();
    Vec3 dir = Vec3::Zero();

    static std::array<Vec3, kMaxShCoeffs> make_zero_sh() {
        std::array<Vec3, kMaxShCoeffs> out;
        out.fill(Vec3::Zero());
        return out;
    }
};

/// Gradient of a scalar loss with respect to every learnable field of one primitive.
struct PrimitiveGrad {
    Vec3 d_mu = Vec3::Zero();
    Vec3 d_log_scale = Vec3::Zero();
    Vec4 d_rot = Vec4::Zero();
    std::array<Vec3, kMaxShCoeffs> d_sh = SkewGaussian::make_zero_sh();
    Vec2 d_opacity_logits = Vec2::Zero();
    Vec3 d_beta = Vec3::Zero();
    Vec3 d_dir = Vec3::Zero();

    PrimitiveGrad& operator+=(const PrimitiveGrad& o);
    bool all_finite() const;
};

struct Scene {
    std::vector<SkewGaussian> primitives;
    Vec3 background = Vec3::Zero();
    int sh_degree = 0;

    std::size_t size() const noexcept { return primitives.size(); }
};

/// Learnable parameter groups; each has its own learning rate.
enum class ParamGroup { Position, Scale, Rotation, ShDc, ShRest, Opacity, Beta, Dir };

/// Number of scalar parameters per primitive for a given SH degree.
constexpr int param_count(int sh_degree) { return 3 + 3 + 4 + 3 * sh_coeff_count(sh_degree) + 2 + 3 + 3; }

/// Group of flat parameter index `k` (layout of pack_params).
ParamGroup param_group(int k, int sh_degree);

/// Flattens the active fields of `g` into `out` (size param_count(sh_degree)).
void pack_params(const SkewGaussian& g, int sh_degree, std::span<double> out);
void unpack_params(std::span<const double> in, int sh_degree, SkewGaussian& g);
void pack_grad(const PrimitiveGrad& d, int sh_degree, std::span<double> out);

inline double sigmoid(double x) noexcept { return 1.0 / (1.0 + std::exp(-x)); }
inline double logit(double p) noexcept { return std::log(p / (1.0 - p)); }

/// Rotation matrix of the normalized quaternion (w, x, y, z).
Mat3 rotation_matrix(const Vec4& q);

/// Sigma = R S S^T R^T with S = diag(exp(log_scale)).
Mat3 covariance3d(const SkewGaussian& g);

/// Finite fields, positive finite quaternion norm.
bool is_valid(const SkewGaussian& g);

/// Throws Error(InvalidArgument) naming the first invalid primitive.
void validate(const Scene& scene);

}  // namespace skewsplat
