#pragma once

#include <skewsplat/camera.hpp>
#include <skewsplat/image.hpp>
#include <skewsplat/scene.hpp>

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

namespace skewsplat {

struct RenderConfig {
    int tile_px = 16;
    /// Screen-space dilation s in px^2.
    double dilation = 0.3;
    double alpha_max = kernel::kAlphaMax;
    double alpha_min = kernel::kAlphaMin;
    /// Blending stops before a splat would push T below this value.
    double transmittance_min = 1e-4;
    double skew_clamp = kernel::kSkewClamp;
    /// lambda of the opacity-gradient damping 1 / (1 + lambda |beta_2d|^2).
    double opacity_damping = 0.0;
    /// Worker threads; 0 = hardware concurrency. Never affects results.
    int threads = 0;
    /// Largest accepted image side.
    int max_dim = 16384;

    ProjectionSettings projection() const { return {dilation, skew_clamp, alpha_min}; }
};

struct TileGrid {
    int tile_px = 16;
    int tiles_x = 0;
    int tiles_y = 0;
    /// [begin, end) into the instance list, one entry per tile (row-major).
    std::vector<std::pair<std::uint32_t, std::uint32_t>> ranges;

    int tile_count() const noexcept { return tiles_x * tiles_y; }
};

struct Binning {
    TileGrid grid;
    /// Splat indices, sorted by (tile, depth, splat index).
    std::vector<std::uint32_t> instances;
};

/// Duplicates every splat into each tile its support circle touches, then
/// sorts by tile, depth, and index.
Binning bin_and_sort(std::span<const ScreenSplat> splats, int width, int height, int tile_px);

/// Forward pass output plus what the backward pass needs to replay it.
struct FrameBundle {
    int width = 0;
    int height = 0;
    Image color;
    std::vector<double> final_T;
    /// Number of splats blended into each pixel.
    std::vector<std::uint32_t> n_contrib;
    /// One past the instance-list position of the last splat blended into
    /// each pixel (the tile's range begin if none was).
    std::vector<std::uint32_t> last_idx;
    /// Visible primitives: scene index and projection, parallel arrays.
    std::vector<std::uint32_t> visible;
    std::vector<ScreenSplat> splats;
    Binning binning;
    Vec3 background = Vec3::Zero();
    /// Hash of the scene, view, and config that produced the frame.
    std::uint64_t fingerprint = 0;
};

/// Hash used to check that a frame belongs to a (scene, view, config).
std::uint64_t render_fingerprint(const Scene& scene, const CameraView& view, const RenderConfig& cfg);

FrameBundle render_forward(const Scene& scene, const CameraView& view, const RenderConfig& cfg = {});

/// Convenience wrapper returning only the composited image.
Image render_image(const Scene& scene, const CameraView& view, const RenderConfig& cfg = {});

/// Per-view gradients of one backward pass.
struct GradientBundle {
    std::vector<PrimitiveGrad> grads;
    /// Norm of the NDC-space mean gradient in this view.
    std::vector<double> g_uv;
    /// |dL/dz| of the camera-space center in this view.
    std::vector<double> g_z;
    /// Whether the primitive was projected in this view.
    std::vector<std::uint8_t> visible;
    /// Screen-space gradients before the projection chain (zero if not visible).
    std::vector<ScreenGrad> screen;
};

/// Analytic backward pass. `dL_dpixels` is laid out like Image::data.
/// Throws Error(ContractViolation) if `frame` was not rendered from the same
/// scene, view, and config.
GradientBundle render_backward(const Scene& scene, const CameraView& view, const FrameBundle& frame,
                               std::span<const double> dL_dpixels, const RenderConfig& cfg = {});

}  // namespace skewsplat
