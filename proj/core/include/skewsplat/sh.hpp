#pragma once

#include <skewsplat/scene.hpp>

#include <array>

namespace skewsplat {

/// Real spherical-harmonics basis (degrees 0..3) and its gradient with respect
/// to the (unit) view direction, in the coefficient order used by 3DGS scenes.
struct ShBasis {
    int count = 1;
    std::array<double, kMaxShCoeffs> value{};
    std::array<Vec3, kMaxShCoeffs> grad{};
};

ShBasis sh_basis(int degree, const Vec3& dir);

/// View-dependent color: sum_k Y_k(dir) sh_k + 0.5, clamped below at zero.
/// `clamped[c]` reports which channels hit the clamp (their gradient is zero).
Vec3 eval_sh_color(int degree, const std::array<Vec3, kMaxShCoeffs>& sh, const Vec3& dir,
                   std::array<bool, 3>* clamped = nullptr);

/// DC coefficient that reproduces `rgb` at degree 0.
Vec3 rgb_to_sh_dc(const Vec3& rgb);

}  // namespace skewsplat
