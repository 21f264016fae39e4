#include <skewsplat/sh.hpp>

namespace skewsplat {

namespace {

constexpr double kC0 = 0.28209479177387814;
constexpr double kC1 = 0.4886025119029199;
constexpr double kC2[] = {1.0925484305920792, -1.0925484305920792, 0.31539156525252005,
                          -1.0925484305920792, 0.5462742152960396};
constexpr double kC3[] = {-0.5900435899266435, 2.890611442640554, -0.4570457994644658,
                          0.3731763325901154,  -0.4570457994644658, 1.445305721320277,
                          -0.5900435899266435};

}  // namespace

ShBasis sh_basis(int degree, const Vec3& d) {
    ShBasis b;
    b.count = sh_coeff_count(degree);
    b.grad.fill(Vec3::Zero());
    b.value[0] = kC0;
    if (degree < 1) return b;

    const double x = d.x(), y = d.y(), z = d.z();
    b.value[1] = -kC1 * y;
    b.value[2] = kC1 * z;
    b.value[3] = -kC1 * x;
    b.grad[1] = Vec3(0, -kC1, 0);
    b.grad[2] = Vec3(0, 0, kC1);
    b.grad[3] = Vec3(-kC1, 0, 0);
    if (degree < 2) return b;

    const double xx = x * x, yy = y * y, zz = z * z;
    b.value[4] = kC2[0] * x * y;
    b.value[5] = kC2[1] * y * z;
    b.value[6] = kC2[2] * (2.0 * zz - xx - yy);
    b.value[7] = kC2[3] * x * z;
    b.value[8] = kC2[4] * (xx - yy);
    b.grad[4] = kC2[0] * Vec3(y, x, 0);
    b.grad[5] = kC2[1] * Vec3(0, z, y);
    b.grad[6] = kC2[2] * Vec3(-2 * x, -2 * y, 4 * z);
    b.grad[7] = kC2[3] * Vec3(z, 0, x);
    b.grad[8] = kC2[4] * Vec3(2 * x, -2 * y, 0);
    if (degree < 3) return b;

    b.value[9] = kC3[0] * y * (3.0 * xx - yy);
    b.value[10] = kC3[1] * x * y * z;
    b.value[11] = kC3[2] * y * (4.0 * zz - xx - yy);
    b.value[12] = kC3[3] * z * (2.0 * zz - 3.0 * xx - 3.0 * yy);
    b.value[13] = kC3[4] * x * (4.0 * zz - xx - yy);
    b.value[14] = kC3[5] * z * (xx - yy);
    b.value[15] = kC3[6] * x * (xx - 3.0 * yy);
    b.grad[9] = kC3[0] * Vec3(6 * x * y, 3 * xx - 3 * yy, 0);
    b.grad[10] = kC3[1] * Vec3(y * z, x * z, x * y);
    b.grad[11] = kC3[2] * Vec3(-2 * x * y, 4 * zz - xx - 3 * yy, 8 * y * z);
    b.grad[12] = kC3[3] * Vec3(-6 * x * z, -6 * y * z, 6 * zz - 3 * xx - 3 * yy);
    b.grad[13] = kC3[4] * Vec3(4 * zz - 3 * xx - yy, -2 * x * y, 8 * x * z);
    b.grad[14] = kC3[5] * Vec3(2 * x * z, -2 * y * z, xx - yy);
    b.grad[15] = kC3[6] * Vec3(3 * xx - 3 * yy, -6 * x * y, 0);
    return b;
}

Vec3 eval_sh_color(int degree, const std::array<Vec3, kMaxShCoeffs>& sh, const Vec3& dir,
                   std::array<bool, 3>* clamped) {
    const ShBasis b = sh_basis(degree, dir);
    Vec3 c = Vec3::Constant(0.5);
    for (int k = 0; k < b.count; ++k) c += b.value[k] * sh[k];
    for (int i = 0; i < 3; ++i) {
        const bool neg = c[i] < 0.0;
        if (clamped) (*clamped)[i] = neg;
        if (neg) c[i] = 0.0;
    }
    return c;
}

Vec3 rgb_to_sh_dc(const Vec3& rgb) { return (rgb.array() - 0.5).matrix() / kC0; }

}  // namespace skewsplat
