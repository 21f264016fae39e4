#pragma once

#include <skewsplat/scene.hpp>

#include <filesystem>
#include <iosfwd>

namespace skewsplat {

/// Storage type of every vertex property written by save_ply.
enum class PlyPrecision { Float64, Float32 };

/// Binary little-endian PLY in the 3DGS vertex layout plus skew_0..2,
/// dir_0..2 and opacity2. Float64 (the default) round-trips bit-exactly.
void save_ply(const Scene& scene, const std::filesystem::path& path,
              PlyPrecision precision = PlyPrecision::Float64);
void write_ply(const Scene& scene, std::ostream& out, PlyPrecision precision = PlyPrecision::Float64);

/// Reads binary little-endian PLY with any scalar property types. Missing
/// skew/dir fields read as zero and a missing opacity2 copies opacity.
/// Throws Error with code MalformedHeader, UnsupportedFormat, MissingField or
/// TruncatedPayload; field() names the offending property.
Scene load_ply(const std::filesystem::path& path);
Scene read_ply(std::istream& in);

}  // namespace skewsplat
