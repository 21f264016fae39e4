#pragma once

#include <skewsplat/types.hpp>

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace skewsplat {

/// Row-major RGB image of doubles, top-left origin.
struct Image {
    int width = 0;
    int height = 0;
    std::vector<double> data;

    Image() = default;
    Image(int w, int h, double fill = 0.0) : width(w), height(h), data(std::size_t(w) * h * 3, fill) {}

    std::size_t pixel_count() const noexcept { return std::size_t(width) * height; }
    double& at(int x, int y, int c) { return data[(std::size_t(y) * width + x) * 3 + c]; }
    double at(int x, int y, int c) const { return data[(std::size_t(y) * width + x) * 3 + c]; }
    const Vec3 pixel(int x, int y) const {
        const double* p = &data[(std::size_t(y) * width + x) * 3];
        return {p[0], p[1], p[2]};
    }
    void set_pixel(int x, int y, const Vec3& v) {
        double* p = &data[(std::size_t(y) * width + x) * 3];
        p[0] = v[0];
        p[1] = v[1];
        p[2] = v[2];
    }
};

/// lround(clamp(v, 0, 1) * 255).
std::uint8_t quantize_channel(double v) noexcept;

/// Interleaved RGB8 bytes, row-major, top-left origin.
std::vector<std::uint8_t> to_rgb8(const Image& img);
Image from_rgb8(std::span<const std::uint8_t> rgb, int width, int height);

/// 8-bit PNG I/O. Gray and alpha channels are accepted on load (alpha dropped).
Image load_png(const std::filesystem::path& path);
void save_png(const Image& img, const std::filesystem::path& path);
std::vector<std::uint8_t> encode_png(const Image& img);
Image decode_png(std::span<const std::uint8_t> bytes);

}  // namespace skewsplat
