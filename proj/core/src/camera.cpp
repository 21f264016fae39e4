#include <skewsplat/camera.hpp>
#include <skewsplat/sh.hpp>

#include <Eigen/LU>

#include <algorithm>
#include <atomic>
#include <cctype>
#include <cmath>
#include <string>

namespace skewsplat {

namespace {

std::atomic<std::uint64_t> g_skew_fallbacks{0};

struct SkewProjection {
    Vec2 raw = Vec2::Zero();
    Vec2 out = Vec2::Zero();
    Vec2 u = Vec2::Zero();
    double r = 1.0;
    bool fallback = false;
};

SkewProjection skew_project_full(const Vec3& beta, const Mat23& T, const Mat3& sigma,
                                 const Mat2& cov2d, double clamp) {
    SkewProjection p;
    if (beta.isZero(0.0)) return p;
    const Vec3 sb = sigma * beta;
    const Vec2 v = T * sb;
    p.u = cov2d.inverse() * v;
    const double radicand = 1.0 + beta.dot(sb) - v.dot(p.u);
    if (!(radicand > 0.0)) {
        g_skew_fallbacks.fetch_add(1, std::memory_order_relaxed);
        p.fallback = true;
        p.u.setZero();
        return p;
    }
    p.r = std::sqrt(radicand);
    p.raw = p.u / p.r;
    const double n = p.raw.norm();
    p.out = (n > clamp) ? Vec2(p.raw * (clamp / n)) : p.raw;
    return p;
}

// Reverse-mode derivative of skew_project_full; adds into the d* outputs.
void skew_project_backward(const SkewProjection& p, const Vec3& beta, const Mat23& T,
                           const Mat3& sigma, const Mat2& cov2d, double clamp, const Vec2& d_out,
                           Mat3& d_sigma, Mat23& d_T, Mat2& d_cov2d, Vec3& d_beta) {
    if (p.fallback) return;
    Vec2 d_raw = d_out;
    const double n = p.raw.norm();
    if (n > clamp) {
        const Vec2 hat = p.raw / n;
        d_raw = (clamp / n) * (d_out - hat * hat.dot(d_out));
    }
    const Mat2 cinv = cov2d.inverse();
    const Vec3 sb = sigma * beta;
    const Vec2 du = d_raw / p.r;
    const double dr = -d_raw.dot(p.u) / (p.r * p.r);
    const double dq = dr / (2.0 * p.r);

    // u = C^-1 v
    Vec2 dv = cinv.transpose() * du;
    d_cov2d += -(cinv.transpose() * du) * p.u.transpose();
    // q = beta^T Sigma beta - v^T C^-1 v
    d_beta += 2.0 * dq * sb;
    d_sigma += dq * beta * beta.transpose();
    dv += -2.0 * dq * p.u;
    d_cov2d += dq * p.u * p.u.transpose();
    // v = T Sigma beta
    d_T += dv * sb.transpose();
    d_sigma += T.transpose() * dv * beta.transpose();
    d_beta += sigma * T.transpose() * dv;
}

// Derivative of the normalized-quaternion rotation matrix, dL/dq from dL/dR.
Vec4 rotation_backward(const Vec4& q, const Mat3& g) {
    const double w = q[0], x = q[1], y = q[2], z = q[3];
    Vec4 d;
    d[0] = 2.0 * (-z * g(0, 1) + y * g(0, 2) + z * g(1, 0) - x * g(1, 2) - y * g(2, 0) + x * g(2, 1));
    d[1] = 2.0 * (y * g(0, 1) + z * g(0, 2) + y * g(1, 0) - 2.0 * x * g(1, 1) - w * g(1, 2) +
                  z * g(2, 0) + w * g(2, 1) - 2.0 * x * g(2, 2));
    d[2] = 2.0 * (-2.0 * y * g(0, 0) + x * g(0, 1) + w * g(0, 2) + x * g(1, 0) + z * g(1, 2) -
                  w * g(2, 0) + z * g(2, 1) - 2.0 * y * g(2, 2));
    d[3] = 2.0 * (-2.0 * z * g(0, 0) - w * g(0, 1) + x * g(0, 2) + w * g(1, 0) - 2.0 * z * g(1, 1) +
                  y * g(1, 2) + x * g(2, 0) + y * g(2, 1));
    return d;
}

// Shared forward intermediates of project_splat and its backward.
struct Projected {
    Vec4 q_unit;
    double q_norm = 1.0;
    Mat3 R;
    Vec3 scale;
    Mat3 M;
    Mat3 sigma;
    Vec3 t;
    Mat23 J;
    Mat23 T;
    Mat2 cov2d;
    Mat2 cov_dilated;
    Mat2 conic_m;
    double det2d = 0.0;
    double det_dilated = 0.0;
    double comp = 1.0;
    Vec2 sig_opacity;
    SkewProjection skew;
    SkewProjection boundary;
    Vec3 view_dir = Vec3::UnitZ();
    double view_dist = 1.0;
    std::array<bool, 3> color_clamped{};
    ScreenSplat splat;
};

bool project_core(const SkewGaussian& g, const ViewTransform& view, int sh_degree,
                  const ProjectionSettings& s, Projected& p) {
    p.t = view.w2c_rot * g.mu + view.w2c_trans;
    const double tz = p.t.z();
    if (!(tz > view.near) || tz > view.far) return false;

    p.q_norm = g.rot.norm();
    p.q_unit = g.rot / p.q_norm;
    p.R = rotation_matrix(p.q_unit);
    p.scale = g.log_scale.array().exp().matrix();
    p.M = p.R * p.scale.asDiagonal();
    p.sigma = p.M * p.M.transpose();

    const double tx = p.t.x(), ty = p.t.y();
    p.J << view.fx / tz, 0.0, -view.fx * tx / (tz * tz), 0.0, view.fy / tz, -view.fy * ty / (tz * tz);
    p.T = p.J * view.w2c_rot;
    p.cov2d = p.T * p.sigma * p.T.transpose();
    p.cov2d(1, 0) = p.cov2d(0, 1);
    p.cov_dilated = p.cov2d + s.dilation * Mat2::Identity();
    p.det2d = p.cov2d.determinant();
    p.det_dilated = p.cov_dilated.determinant();
    if (!(p.det_dilated > 0.0)) return false;
    p.conic_m << p.cov_dilated(1, 1), -p.cov_dilated(0, 1), -p.cov_dilated(0, 1), p.cov_dilated(0, 0);
    p.conic_m /= p.det_dilated;
    p.comp = (s.dilation == 0.0) ? 1.0 : std::sqrt(std::max(p.det2d, 0.0) / p.det_dilated);

    p.sig_opacity = Vec2(sigmoid(g.opacity_logits[0]), sigmoid(g.opacity_logits[1]));

    ScreenSplat& out = p.splat;
    out.mean2d = Vec2(view.fx * tx / tz + view.cx, view.fy * ty / tz + view.cy);
    out.conic = {p.conic_m(0, 0), p.conic_m(0, 1), p.conic_m(1, 1)};
    out.depth = tz;
    out.dilation_comp = p.comp;
    out.opacity_pair = {p.sig_opacity[0] * p.comp, p.sig_opacity[1] * p.comp};

    const double o_max = std::max(out.opacity_pair[0], out.opacity_pair[1]);
    double extent2 = 9.0;  // 3 sigma when there is no opacity floor
    if (s.alpha_min > 0.0) {
        // alpha <= 2 o G, so alpha >= alpha_min needs G >= alpha_min / (2 o).
        const double ratio = 2.0 * o_max / s.alpha_min;
        if (!(ratio > 1.0)) return false;
        extent2 = 2.0 * std::log(ratio);
    }
    const double mid = 0.5 * (p.cov_dilated(0, 0) + p.cov_dilated(1, 1));
    const double lambda_max = mid + std::sqrt(std::max(mid * mid - p.det_dilated, 0.0));
    out.radius = std::sqrt(extent2 * lambda_max);
    const double r = out.radius;
    if (out.mean2d.x() + r < 0.0 || out.mean2d.x() - r > view.width || out.mean2d.y() + r < 0.0 ||
        out.mean2d.y() - r > view.height)
        return false;

    p.skew = skew_project_full(g.beta, p.T, p.sigma, p.cov_dilated, s.skew_clamp);
    p.boundary = skew_project_full(g.beta + g.dir, p.T, p.sigma, p.cov_dilated, s.skew_clamp);
    out.skew2d = {p.skew.out.x(), p.skew.out.y()};
    out.boundary2d = {p.boundary.out.x(), p.boundary.out.y()};

    const Vec3 v = g.mu - view.cam_pos;
    p.view_dist = v.norm();
    p.view_dir = p.view_dist > 0.0 ? Vec3(v / p.view_dist) : Vec3::UnitZ();
    out.color = eval_sh_color(sh_degree, g.sh, p.view_dir, &p.color_clamped);
    return true;
}

}  // namespace

std::string_view to_string(Convention c) noexcept {
    return c == Convention::OpenGL_RUB ? "opengl" : "opencv";
}

std::optional<Convention> parse_convention(std::string_view s) noexcept {
    std::string lower(s);
    std::transform(lower.begin(), lower.end(), lower.begin(),
                   [](unsigned char ch) { return static_cast<char>(std::tolower(ch)); });
    if (lower == "opengl" || lower == "blender") return Convention::OpenGL_RUB;
    if (lower == "opencv" || lower == "colmap") return Convention::OpenCV_RDF;
    return std::nullopt;
}

Mat4 align_matrix() { return Vec4(1.0, -1.0, -1.0, 1.0).asDiagonal(); }

CameraView to_opencv(const CameraView& view) {
    if (view.convention == Convention::OpenCV_RDF) return view;
    CameraView out = view;
    out.c2w = view.c2w * align_matrix();
    out.convention = Convention::OpenCV_RDF;
    return out;
}

double fov_y_from_aspect(double fov_x, int width, int height) {
    return 2.0 * std::atan(std::tan(0.5 * fov_x) * static_cast<double>(height) / width);
}

double effective_fov_y(const CameraView& view) {
    return view.fov_y > 0.0 ? view.fov_y : fov_y_from_aspect(view.fov_x, view.width, view.height);
}

Mat3 intrinsics(const CameraView& view) {
    const double w = view.width, h = view.height;
    Mat3 k = Mat3::Zero();
    k(0, 0) = w / (2.0 * std::tan(0.5 * view.fov_x));
    k(1, 1) = h / (2.0 * std::tan(0.5 * effective_fov_y(view)));
    k(0, 2) = 0.5 * w;
    k(1, 2) = 0.5 * h;
    k(2, 2) = 1.0;
    return k;
}

CameraView look_at(const Vec3& eye, const Vec3& target, const Vec3& up, int width, int height,
                   double fov_x) {
    const Vec3 forward = (target - eye).normalized();
    const Vec3 right = (-up).cross(forward).normalized();
    const Vec3 down = forward.cross(right);
    CameraView v;
    v.c2w.setIdentity();
    v.c2w.block<3, 1>(0, 0) = right;
    v.c2w.block<3, 1>(0, 1) = down;
    v.c2w.block<3, 1>(0, 2) = forward;
    v.c2w.block<3, 1>(0, 3) = eye;
    v.convention = Convention::OpenCV_RDF;
    v.width = width;
    v.height = height;
    v.fov_x = fov_x;
    return v;
}

void validate(const CameraView& view) {
    auto fail = [](const std::string& msg, const char* field) {
        throw Error(ErrorCode::InvalidArgument, msg, field);
    };
    if (!view.c2w.allFinite()) fail("camera matrix has non-finite entries", "c2w");
    if ((view.c2w.row(3) - Eigen::RowVector4d(0, 0, 0, 1)).cwiseAbs().maxCoeff() > 1e-6)
        fail("camera matrix bottom row must be (0, 0, 0, 1)", "c2w");
    const Mat3 r = view.c2w.topLeftCorner<3, 3>();
    if ((r.transpose() * r - Mat3::Identity()).cwiseAbs().maxCoeff() > 1e-6)
        fail("camera rotation block is not orthonormal", "c2w");
    if (view.width < 1 || view.height < 1) fail("image dimensions must be >= 1", "width");
    if (!(view.fov_x > 0.0 && view.fov_x < kernel::kPi)) fail("fov_x must lie in (0, pi)", "fov_x");
    if (view.fov_y > 0.0 && !(view.fov_y < kernel::kPi)) fail("fov_y must lie in (0, pi)", "fov_y");
    if (!(view.near > 0.0) || !(view.far > view.near)) fail("need 0 < near < far", "near");
}

ViewTransform ViewTransform::from(const CameraView& input) {
    const CameraView view = to_opencv(input);
    ViewTransform vt;
    const Mat3 r = view.c2w.topLeftCorner<3, 3>();
    const Vec3 t = view.c2w.topRightCorner<3, 1>();
    vt.w2c_rot = r.transpose();
    vt.w2c_trans = -r.transpose() * t;
    vt.cam_pos = t;
    const Mat3 k = intrinsics(view);
    vt.fx = k(0, 0);
    vt.fy = k(1, 1);
    vt.cx = k(0, 2);
    vt.cy = k(1, 2);
    vt.width = view.width;
    vt.height = view.height;
    vt.near = view.near;
    vt.far = view.far;
    return vt;
}

std::uint64_t skew_projection_fallbacks() noexcept {
    return g_skew_fallbacks.load(std::memory_order_relaxed);
}

kernel::Skew2D project_skewness(const Vec3& beta, const Mat23& T, const Mat3& cov3d,
                                const Mat2& cov2d) {
    const SkewProjection p =
        skew_project_full(beta, T, cov3d, cov2d, std::numeric_limits<double>::infinity());
    return {p.out.x(), p.out.y()};
}

std::optional<ScreenSplat> project_splat(const SkewGaussian& g, const ViewTransform& view,
                                         int sh_degree, const ProjectionSettings& settings) {
    Projected p;
    if (!project_core(g, view, sh_degree, settings, p)) return std::nullopt;
    return p.splat;
}

double project_splat_backward(const SkewGaussian& g, const ViewTransform& view, int sh_degree,
                              const ProjectionSettings& s, const ScreenGrad& grad,
                              PrimitiveGrad& out) {
    Projected p;
    if (!project_core(g, view, sh_degree, s, p)) return 0.0;

    // Color through the SH basis, including its dependence on the view direction.
    Vec3 d_color = grad.d_color;
    for (int c = 0; c < 3; ++c)
        if (p.color_clamped[c]) d_color[c] = 0.0;
    const ShBasis basis = sh_basis(sh_degree, p.view_dir);
    Vec3 d_view_dir = Vec3::Zero();
    for (int k = 0; k < basis.count; ++k) {
        out.d_sh[k] += basis.value[k] * d_color;
        d_view_dir += basis.grad[k] * g.sh[k].dot(d_color);
    }
    if (sh_degree > 0 && p.view_dist > 0.0)
        out.d_mu += (d_view_dir - p.view_dir * p.view_dir.dot(d_view_dir)) / p.view_dist;

    // Opacity pair: o_k = sigmoid(l_k) * comp.
    double d_comp = 0.0;
    for (int k = 0; k < 2; ++k) {
        const double sg = p.sig_opacity[k];
        out.d_opacity_logits[k] += grad.d_opacity[k] * p.comp * sg * (1.0 - sg);
        d_comp += grad.d_opacity[k] * sg;
    }

    // Screen-space covariance gradients.
    Mat2 d_dilated = Mat2::Zero();
    Mat3 d_sigma = Mat3::Zero();
    Mat23 d_T = Mat23::Zero();
    {
        Mat2 d_conic;
        d_conic << grad.d_conic[0], 0.5 * grad.d_conic[1], 0.5 * grad.d_conic[1], grad.d_conic[2];
        d_dilated += -p.conic_m * d_conic * p.conic_m;
    }
    Vec3 d_beta_skew = Vec3::Zero();
    Vec3 d_beta_boundary = Vec3::Zero();
    skew_project_backward(p.skew, g.beta, p.T, p.sigma, p.cov_dilated, s.skew_clamp, grad.d_skew,
                          d_sigma, d_T, d_dilated, d_beta_skew);
    skew_project_backward(p.boundary, g.beta + g.dir, p.T, p.sigma, p.cov_dilated, s.skew_clamp,
                          grad.d_boundary, d_sigma, d_T, d_dilated, d_beta_boundary);
    out.d_beta += d_beta_skew + d_beta_boundary;
    out.d_dir += d_beta_boundary;

    Mat2 d_cov2d = d_dilated;
    if (s.dilation != 0.0 && p.det2d > 0.0 && d_comp != 0.0) {
        const Mat2 inv2d = p.cov2d.inverse();
        d_cov2d += d_comp * 0.5 * p.comp * (inv2d - p.conic_m).transpose();
    }

    // cov2d = T Sigma T^T
    d_T += (d_cov2d + d_cov2d.transpose()) * p.T * p.sigma;
    d_sigma += p.T.transpose() * d_cov2d * p.T;

    // Sigma = M M^T, M = R S
    const Mat3 d_M = (d_sigma + d_sigma.transpose()) * p.M;
    const Mat3 d_R = d_M * p.scale.asDiagonal();
    for (int j = 0; j < 3; ++j) {
        const double d_sj = p.R.col(j).dot(d_M.col(j));
        out.d_log_scale[j] += d_sj * p.scale[j];
    }
    const Vec4 d_qunit = rotation_backward(p.q_unit, d_R);
    out.d_rot += (d_qunit - p.q_unit * p.q_unit.dot(d_qunit)) / p.q_norm;

    // T = J W, J depends on the camera-space center t.
    const Mat23 d_J = d_T * view.w2c_rot.transpose();
    const double tx = p.t.x(), ty = p.t.y(), tz = p.t.z();
    const double tz2 = tz * tz, tz3 = tz2 * tz;
    const double fx = view.fx, fy = view.fy;
    Vec3 d_t = Vec3::Zero();
    d_t.x() += d_J(0, 2) * (-fx / tz2);
    d_t.y() += d_J(1, 2) * (-fy / tz2);
    d_t.z() += d_J(0, 0) * (-fx / tz2) + d_J(0, 2) * (2.0 * fx * tx / tz3) + d_J(1, 1) * (-fy / tz2) +
               d_J(1, 2) * (2.0 * fy * ty / tz3);
    // mean2d = (fx tx / tz + cx, fy ty / tz + cy)
    d_t.x() += grad.d_mean2d.x() * fx / tz;
    d_t.y() += grad.d_mean2d.y() * fy / tz;
    d_t.z() += -grad.d_mean2d.x() * fx * tx / tz2 - grad.d_mean2d.y() * fy * ty / tz2;

    out.d_mu += view.w2c_rot.transpose() * d_t;
    return d_t.z();
}

}  // namespace skewsplat
