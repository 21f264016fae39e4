#pragma once

#include <skewsplat/kernel_math.hpp>
#include <skewsplat/scene.hpp>
#include <skewsplat/types.hpp>

#include <array>
#include <cstdint>
#include <optional>
#include <string_view>

namespace skewsplat {

/// Local camera axis convention of a camera-to-world matrix.
///   OpenGL_RUB: x right, y up, looks down -z (Blender, WebGL).
///   OpenCV_RDF: x right, y down, looks down +z (COLMAP, the rasterizer).
enum class Convention { OpenGL_RUB, OpenCV_RDF };

std::string_view to_string(Convention c) noexcept;
/// Accepts "opengl" / "opencv" (case-insensitive).
std::optional<Convention> parse_convention(std::string_view s) noexcept;

struct CameraView {
    Mat4 c2w = Mat4::Identity();
    Convention convention = Convention::OpenCV_RDF;
    int width = 1;
    int height = 1;
    double fov_x = 1.0;
    /// Vertical field of view; values <= 0 mean "derive from fov_x and aspect".
    double fov_y = 0.0;
    double near = 0.01;
    double far = 1.0e4;
};

/// T_align = diag(1, -1, -1, 1).
Mat4 align_matrix();

/// OpenGL pose -> OpenCV pose via c2w * T_align; OpenCV poses pass through.
CameraView to_opencv(const CameraView& view);

/// tan(fov_y / 2) = tan(fov_x / 2) * H / W.
double fov_y_from_aspect(double fov_x, int width, int height);

/// fov_y of the view, derived from the aspect ratio when unset.
double effective_fov_y(const CameraView& view);

/// K with the principal point at the image center.
Mat3 intrinsics(const CameraView& view);

/// OpenCV-convention view at `eye` looking at `target`; `up` fixes the roll
/// (image y points along -up).
CameraView look_at(const Vec3& eye, const Vec3& target, const Vec3& up, int width, int height,
                   double fov_x);

/// Throws Error(InvalidArgument) if the view breaks its invariants.
void validate(const CameraView& view);

/// Per-view constants used by projection, in OpenCV convention.
struct ViewTransform {
    Mat3 w2c_rot = Mat3::Identity();
    Vec3 w2c_trans = Vec3::Zero();
    Vec3 cam_pos = Vec3::Zero();
    double fx = 1.0, fy = 1.0, cx = 0.5, cy = 0.5;
    int width = 1;
    int height = 1;
    double near = 0.01;
    double far = 1.0e4;

    static ViewTransform from(const CameraView& view);
};

/// Projection of one primitive into one view.
struct ScreenSplat {
    Vec2 mean2d = Vec2::Zero();
    kernel::Conic conic;
    /// Projected skewness of beta (drives the 1 + erf modulation).
    kernel::Skew2D skew2d;
    /// Projected normal of the opacity boundary, beta + dir.
    kernel::Skew2D boundary2d;
    double depth = 0.0;
    /// sigmoid(opacity_logits) * dilation_comp.
    std::array<double, 2> opacity_pair{0.0, 0.0};
    double dilation_comp = 1.0;
    Vec3 color = Vec3::Zero();
    double radius = 0.0;
};

struct ProjectionSettings {
    /// Isotropic screen-space covariance inflation s, in px^2.
    double dilation = 0.3;
    double skew_clamp = kernel::kSkewClamp;
    /// Opacity floor of the blender; fixes the support radius so that no pixel
    /// outside it can reach alpha_min.
    double alpha_min = kernel::kAlphaMin;
};

/// Number of skew projections that fell back to zero skew (negative radicand).
std::uint64_t skew_projection_fallbacks() noexcept;

/// Affine-transform law of the skew-normal: the skewness of T x for
/// x ~ SN(Sigma, beta), given cov2d = T Sigma T^T (+ any independent isotropic
/// inflation). Falls back to zero skew if the radicand is negative.
kernel::Skew2D project_skewness(const Vec3& beta, const Mat23& T, const Mat3& cov3d,
                                const Mat2& cov2d);

/// EWA projection with dilation compensation. Empty if the primitive is
/// culled (behind the near plane, beyond far, off screen, or too transparent
/// to ever reach alpha_min).
std::optional<ScreenSplat> project_splat(const SkewGaussian& g, const ViewTransform& view,
                                         int sh_degree, const ProjectionSettings& settings);

/// Loss gradient with respect to one primitive's screen-space quantities.
struct ScreenGrad {
    Vec2 d_mean2d = Vec2::Zero();
    /// (dL/da, dL/db, dL/dc).
    Vec3 d_conic = Vec3::Zero();
    Vec2 d_skew = Vec2::Zero();
    Vec2 d_boundary = Vec2::Zero();
    Vec2 d_opacity = Vec2::Zero();
    Vec3 d_color = Vec3::Zero();

    ScreenGrad& operator+=(const ScreenGrad& o) {
        d_mean2d += o.d_mean2d;
        d_conic += o.d_conic;
        d_skew += o.d_skew;
        d_boundary += o.d_boundary;
        d_opacity += o.d_opacity;
        d_color += o.d_color;
        return *this;
    }
};

/// Chains screen-space gradients back to the primitive's parameters, adding
/// into `out`. Returns dL/dz of the camera-space center.
double project_splat_backward(const SkewGaussian& g, const ViewTransform& view, int sh_degree,
                              const ProjectionSettings& settings, const ScreenGrad& grad,
                              PrimitiveGrad& out);

}  // namespace skewsplat
