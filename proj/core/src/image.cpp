#include <skewsplat/image.hpp>

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>

namespace skewsplat {

std::uint8_t quantize_channel(double v) noexcept {
    if (!(v > 0.0)) return 0;
    if (v >= 1.0) return 255;
    return static_cast<std::uint8_t>(std::lround(v * 255.0));
}

std::vector<std::uint8_t> to_rgb8(const Image& img) {
    std::vector<std::uint8_t> out(img.data.size());
    std::transform(img.data.begin(), img.data.end(), out.begin(), quantize_channel);
    return out;
}

Image from_rgb8(std::span<const std::uint8_t> rgb, int width, int height) {
    if (rgb.size() != std::size_t(width) * height * 3)
        throw Error(ErrorCode::DimensionMismatch, "RGB8 buffer size does not match dimensions");
    Image img(width, height);
    for (std::size_t i = 0; i < rgb.size(); ++i) img.data[i] = rgb[i] / 255.0;
    return img;
}

namespace {

Image finish_read(png_image& pi) {
    pi.format = PNG_FORMAT_RGB;
    std::vector<std::uint8_t> buf(PNG_IMAGE_SIZE(pi));
    if (!png_image_finish_read(&pi, nullptr, buf.data(), 0, nullptr)) {
        std::string msg = pi.message;
        png_image_free(&pi);
        throw Error(ErrorCode::Io, "PNG decode failed: " + msg);
    }
    return from_rgb8(buf, static_cast<int>(pi.width), static_cast<int>(pi.height));
}

png_image make_write_image(const Image& img) {
    if (img.width < 1 || img.height < 1) throw Error(ErrorCode::InvalidArgument, "cannot encode an empty image");
    png_image pi;
    std::memset(&pi, 0, sizeof pi);
    pi.version = PNG_IMAGE_VERSION;
    pi.width = static_cast<png_uint_32>(img.width);
    pi.height = static_cast<png_uint_32>(img.height);
    pi.format = PNG_FORMAT_RGB;
    return pi;
}

}  // namespace

Image load_png(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string(), path.string());
    const std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    try {
        return decode_png(bytes);
    } catch (const Error& e) {
        throw Error(e.code(), path.string() + ": " + e.what(), path.string());
    }
}

Image decode_png(std::span<const std::uint8_t> bytes) {
    png_image pi;
    std::memset(&pi, 0, sizeof pi);
    pi.version = PNG_IMAGE_VERSION;
    if (!png_image_begin_read_from_memory(&pi, bytes.data(), bytes.size()))
        throw Error(ErrorCode::Io, std::string("PNG header unreadable: ") + pi.message);
    return finish_read(pi);
}

std::vector<std::uint8_t> encode_png(const Image& img) {
    png_image pi = make_write_image(img);
    const std::vector<std::uint8_t> rgb = to_rgb8(img);
    png_alloc_size_t size = 0;
    if (!png_image_write_to_memory(&pi, nullptr, &size, 0, rgb.data(), 0, nullptr))
        throw Error(ErrorCode::Io, std::string("PNG encode failed: ") + pi.message);
    std::vector<std::uint8_t> out(size);
    if (!png_image_write_to_memory(&pi, out.data(), &size, 0, rgb.data(), 0, nullptr))
        throw Error(ErrorCode::Io, std::string("PNG encode failed: ") + pi.message);
    out.resize(size);
    return out;
}

void save_png(const Image& img, const std::filesystem::path& path) {
    const std::vector<std::uint8_t> bytes = encode_png(img);
    std::ofstream out(path, std::ios::binary);
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string(), path.string());
}

}  // namespace skewsplat
