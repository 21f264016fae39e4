#include <skewsplat/parallel.hpp>
#include <skewsplat/raster.hpp>

#include "internal/splat_eval.hpp"

#include <algorithm>
#include <cmath>

namespace skewsplat {

GradientBundle render_backward(const Scene& scene, const CameraView& view, const FrameBundle& frame,
                               std::span<const double> dL_dpixels, const RenderConfig& cfg) {
    if (frame.fingerprint != render_fingerprint(scene, view, cfg))
        throw Error(ErrorCode::ContractViolation,
                    "frame was not rendered from this scene, view, and config", "frame");
    if (dL_dpixels.size() != frame.color.data.size())
        throw Error(ErrorCode::DimensionMismatch, "pixel gradient size does not match the frame",
                    "dL_dpixels");

    const int W = frame.width, H = frame.height;
    const TileGrid& grid = frame.binning.grid;
    const auto& instances = frame.binning.instances;
    const Vec3 bg = frame.background;

    // One accumulator per instance; each instance is owned by exactly one tile.
    std::vector<ScreenGrad> inst_grad(instances.size());

    parallel_for(static_cast<std::size_t>(grid.tile_count()), cfg.threads, [&](std::size_t tile) {
        const int tx = static_cast<int>(tile) % grid.tiles_x;
        const int ty = static_cast<int>(tile) / grid.tiles_x;
        const std::uint32_t begin = grid.ranges[tile].first;
        const int x_end = std::min(W, (tx + 1) * grid.tile_px);
        const int y_end = std::min(H, (ty + 1) * grid.tile_px);
        detail::SplatSample smp;
        for (int y = ty * grid.tile_px; y < y_end; ++y) {
            for (int x = tx * grid.tile_px; x < x_end; ++x) {
                const std::size_t p = std::size_t(y) * W + x;
                const Vec3 dL(dL_dpixels[3 * p], dL_dpixels[3 * p + 1], dL_dpixels[3 * p + 2]);
                if (dL.isZero(0.0)) continue;
                const double px = x + 0.5, py = y + 0.5;
                const double T_final = frame.final_T[p];
                const double bg_dot = bg.dot(dL);
                double T = T_final;
                Vec3 accum = Vec3::Zero();
                Vec3 last_color = Vec3::Zero();
                double last_alpha = 0.0;
                for (std::uint32_t k = frame.last_idx[p]; k-- > begin;) {
                    const ScreenSplat& s = frame.splats[instances[k]];
                    if (!detail::sample_splat(s, px, py, cfg.alpha_max, smp)) continue;
                    if (smp.alpha < cfg.alpha_min) continue;
                    const double alpha = smp.alpha;
                    T /= (1.0 - alpha);
                    accum = last_alpha * last_color + (1.0 - last_alpha) * accum;
                    last_alpha = alpha;
                    last_color = s.color;

                    ScreenGrad& g = inst_grad[k];
                    g.d_color += (alpha * T) * dL;
                    if (smp.clamped) continue;

                    double g_alpha = (s.color - accum).dot(dL) * T;
                    g_alpha += -T_final / (1.0 - alpha) * bg_dot;

                    const double dx = smp.dx, dy = smp.dy;
                    const double G = smp.gauss, M = smp.modulation;
                    const double p1 = s.opacity_pair[0], p2 = s.opacity_pair[1];

                    double damp = 1.0;
                    if (cfg.opacity_damping != 0.0) {
                        const double n2 = s.skew2d.beta_x * s.skew2d.beta_x + s.skew2d.beta_y * s.skew2d.beta_y;
                        damp = 1.0 / (1.0 + cfg.opacity_damping * n2);
                    }
                    const double d_o = g_alpha * G * M * damp;
                    g.d_opacity[0] += d_o * 0.5 * (1.0 + smp.erf_w);
                    g.d_opacity[1] += d_o * 0.5 * (1.0 - smp.erf_w);

                    const double ga = g_alpha * alpha;
                    g.d_conic[0] += -0.5 * dx * dx * ga;
                    g.d_conic[1] += -dx * dy * ga;
                    g.d_conic[2] += -0.5 * dy * dy * ga;

                    // d alpha / d beta_2d and d alpha / d boundary_2d are both
                    // proportional to the pixel offset.
                    const double skew_f = smp.opacity * G * kernel::kSqrt2OverPi * std::exp(-smp.z * smp.z);
                    const double bound_f = G * M * (p1 - p2) * kernel::kInvSqrt2Pi * std::exp(-smp.w * smp.w);
                    g.d_skew += g_alpha * skew_f * Vec2(dx, dy);
                    g.d_boundary += g_alpha * bound_f * Vec2(dx, dy);

                    const kernel::Conic& q = s.conic;
                    const double ddx = -alpha * (q.a * dx + q.b * dy) + skew_f * s.skew2d.beta_x +
                                       bound_f * s.boundary2d.beta_x;
                    const double ddy = -alpha * (q.b * dx + q.c * dy) + skew_f * s.skew2d.beta_y +
                                       bound_f * s.boundary2d.beta_y;
                    // delta = pixel - mean, so d/dmean = -d/ddelta.
                    g.d_mean2d += -g_alpha * Vec2(ddx, ddy);
                }
            }
        }
    });

    // Deterministic reduction in instance order.
    std::vector<ScreenGrad> splat_grad(frame.splats.size());
    for (std::size_t k = 0; k < instances.size(); ++k) splat_grad[instances[k]] += inst_grad[k];

    GradientBundle out;
    const std::size_t n = scene.size();
    out.grads.assign(n, PrimitiveGrad{});
    out.g_uv.assign(n, 0.0);
    out.g_z.assign(n, 0.0);
    out.visible.assign(n, 0);
    out.screen.assign(n, ScreenGrad{});

    const ViewTransform vt = ViewTransform::from(view);
    const ProjectionSettings ps = cfg.projection();
    parallel_for(frame.splats.size(), cfg.threads, [&](std::size_t j) {
        const std::uint32_t i = frame.visible[j];
        const ScreenGrad& sg = splat_grad[j];
        const double dz = project_splat_backward(scene.primitives[i], vt, scene.sh_degree, ps, sg, out.grads[i]);
        out.visible[i] = 1;
        out.screen[i] = sg;
        out.g_uv[i] = std::hypot(sg.d_mean2d.x() * 0.5 * W, sg.d_mean2d.y() * 0.5 * H);
        out.g_z[i] = std::abs(dz);
    });
    return out;
}

}  // namespace skewsplat
