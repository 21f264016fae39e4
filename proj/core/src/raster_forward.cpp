#include <skewsplat/parallel.hpp>
#include <skewsplat/raster.hpp>

#include "internal/splat_eval.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <tuple>

namespace skewsplat {

namespace {

bool circle_hits_rect(const Vec2& c, double r, double x0, double y0, double x1, double y1) {
    const double qx = std::clamp(c.x(), x0, x1);
    const double qy = std::clamp(c.y(), y0, y1);
    const double ex = c.x() - qx, ey = c.y() - qy;
    return ex * ex + ey * ey <= r * r;
}

struct Fnv {
    std::uint64_t h = 1469598103934665603ull;
    void bytes(const void* p, std::size_t n) {
        const auto* b = static_cast<const unsigned char*>(p);
        for (std::size_t i = 0; i < n; ++i) {
            h ^= b[i];
            h *= 1099511628211ull;
        }
    }
    void num(double v) { bytes(&v, sizeof v); }
    void num(std::int64_t v) { bytes(&v, sizeof v); }
    template <class M>
    void mat(const M& m) {
        for (Eigen::Index i = 0; i < m.size(); ++i) num(m.data()[i]);
    }
};

}  // namespace

Binning bin_and_sort(std::span<const ScreenSplat> splats, int width, int height, int tile_px) {
    Binning out;
    TileGrid& grid = out.grid;
    grid.tile_px = tile_px;
    grid.tiles_x = (width + tile_px - 1) / tile_px;
    grid.tiles_y = (height + tile_px - 1) / tile_px;
    grid.ranges.assign(static_cast<std::size_t>(grid.tile_count()), {0u, 0u});

    struct Key {
        std::uint32_t tile;
        double depth;
        std::uint32_t index;
    };
    std::vector<Key> keys;
    for (std::uint32_t i = 0; i < splats.size(); ++i) {
        const ScreenSplat& s = splats[i];
        const double r = s.radius;
        const int tx0 = std::max(0, static_cast<int>(std::floor((s.mean2d.x() - r) / tile_px)));
        const int ty0 = std::max(0, static_cast<int>(std::floor((s.mean2d.y() - r) / tile_px)));
        const int tx1 = std::min(grid.tiles_x - 1, static_cast<int>(std::floor((s.mean2d.x() + r) / tile_px)));
        const int ty1 = std::min(grid.tiles_y - 1, static_cast<int>(std::floor((s.mean2d.y() + r) / tile_px)));
        for (int ty = ty0; ty <= ty1; ++ty) {
            for (int tx = tx0; tx <= tx1; ++tx) {
                const double x0 = tx * tile_px, y0 = ty * tile_px;
                if (!circle_hits_rect(s.mean2d, r, x0, y0, x0 + tile_px, y0 + tile_px)) continue;
                keys.push_back({static_cast<std::uint32_t>(ty * grid.tiles_x + tx), s.depth, i});
            }
        }
    }
    std::sort(keys.begin(), keys.end(), [](const Key& a, const Key& b) {
        return std::tie(a.tile, a.depth, a.index) < std::tie(b.tile, b.depth, b.index);
    });

    out.instances.resize(keys.size());
    for (std::size_t k = 0; k < keys.size(); ++k) {
        out.instances[k] = keys[k].index;
        auto& range = grid.ranges[keys[k].tile];
        if (k == 0 || keys[k - 1].tile != keys[k].tile) range.first = static_cast<std::uint32_t>(k);
        range.second = static_cast<std::uint32_t>(k + 1);
    }
    return out;
}

std::uint64_t render_fingerprint(const Scene& scene, const CameraView& view, const RenderConfig& cfg) {
    Fnv f;
    f.num(static_cast<std::int64_t>(scene.size()));
    f.num(static_cast<std::int64_t>(scene.sh_degree));
    f.mat(scene.background);
    for (const SkewGaussian& g : scene.primitives) {
        f.mat(g.mu);
        f.mat(g.log_scale);
        f.mat(g.rot);
        for (int k = 0; k < sh_coeff_count(scene.sh_degree); ++k) f.mat(g.sh[k]);
        f.mat(g.opacity_logits);
        f.mat(g.beta);
        f.mat(g.dir);
    }
    f.mat(view.c2w);
    f.num(static_cast<std::int64_t>(view.convention));
    f.num(static_cast<std::int64_t>(view.width));
    f.num(static_cast<std::int64_t>(view.height));
    f.num(view.fov_x);
    f.num(view.fov_y);
    f.num(view.near);
    f.num(view.far);
    f.num(static_cast<std::int64_t>(cfg.tile_px));
    f.num(cfg.dilation);
    f.num(cfg.alpha_max);
    f.num(cfg.alpha_min);
    f.num(cfg.transmittance_min);
    f.num(cfg.skew_clamp);
    return f.h;
}

FrameBundle render_forward(const Scene& scene, const CameraView& view, const RenderConfig& cfg) {
    validate(view);
    if (view.width > cfg.max_dim || view.height > cfg.max_dim)
        throw Error(ErrorCode::InvalidArgument,
                    "image " + std::to_string(view.width) + "x" + std::to_string(view.height) +
                        " exceeds max dimension " + std::to_string(cfg.max_dim),
                    "width");
    if (cfg.tile_px < 1) throw Error(ErrorCode::InvalidArgument, "tile_px must be >= 1", "tile_px");

    const ViewTransform vt = ViewTransform::from(view);
    const ProjectionSettings ps = cfg.projection();
    const int W = view.width, H = view.height;

    std::vector<std::optional<ScreenSplat>> projected(scene.size());
    parallel_for(scene.size(), cfg.threads, [&](std::size_t i) {
        projected[i] = project_splat(scene.primitives[i], vt, scene.sh_degree, ps);
    });

    FrameBundle fb;
    fb.width = W;
    fb.height = H;
    fb.background = scene.background;
    fb.fingerprint = render_fingerprint(scene, view, cfg);
    for (std::size_t i = 0; i < projected.size(); ++i) {
        if (!projected[i]) continue;
        fb.visible.push_back(static_cast<std::uint32_t>(i));
        fb.splats.push_back(*projected[i]);
    }
    fb.binning = bin_and_sort(fb.splats, W, H, cfg.tile_px);

    fb.color = Image(W, H);
    fb.final_T.assign(fb.color.pixel_count(), 1.0);
    fb.n_contrib.assign(fb.color.pixel_count(), 0u);
    fb.last_idx.assign(fb.color.pixel_count(), 0u);

    const TileGrid& grid = fb.binning.grid;
    parallel_for(static_cast<std::size_t>(grid.tile_count()), cfg.threads, [&](std::size_t tile) {
        const int tx = static_cast<int>(tile) % grid.tiles_x;
        const int ty = static_cast<int>(tile) / grid.tiles_x;
        const auto [begin, end] = grid.ranges[tile];
        const int x_end = std::min(W, (tx + 1) * grid.tile_px);
        const int y_end = std::min(H, (ty + 1) * grid.tile_px);
        detail::SplatSample smp;
        for (int y = ty * grid.tile_px; y < y_end; ++y) {
            for (int x = tx * grid.tile_px; x < x_end; ++x) {
                const double px = x + 0.5, py = y + 0.5;
                double T = 1.0;
                Vec3 c = Vec3::Zero();
                std::uint32_t contrib = 0, last = begin;
                for (std::uint32_t k = begin; k < end; ++k) {
                    const ScreenSplat& s = fb.splats[fb.binning.instances[k]];
                    if (!detail::sample_splat(s, px, py, cfg.alpha_max, smp)) continue;
                    if (smp.alpha < cfg.alpha_min) continue;
                    const double next_T = T * (1.0 - smp.alpha);
                    if (next_T < cfg.transmittance_min) break;
                    c += s.color * (smp.alpha * T);
                    T = next_T;
                    ++contrib;
                    last = k + 1;
                }
                const std::size_t p = std::size_t(y) * W + x;
                fb.color.set_pixel(x, y, c + T * scene.background);
                fb.final_T[p] = T;
                fb.n_contrib[p] = contrib;
                fb.last_idx[p] = last;
            }
        }
    });
    return fb;
}

Image render_image(const Scene& scene, const CameraView& view, const RenderConfig& cfg) {
    return render_forward(scene, view, cfg).color;
}

}  // namespace skewsplat
