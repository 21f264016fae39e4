#include <skewsplat/ply.hpp>

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

namespace skewsplat {

namespace {

static_assert(std::endian::native == std::endian::little, "PLY I/O assumes a little-endian host");

enum class PropType { Int8, UInt8, Int16, UInt16, Int32, UInt32, Float32, Float64 };

const std::map<std::string, PropType>& type_names() {
    static const std::map<std::string, PropType> names = {
        {"char", PropType::Int8},     {"int8", PropType::Int8},       {"uchar", PropType::UInt8},
        {"uint8", PropType::UInt8},   {"short", PropType::Int16},     {"int16", PropType::Int16},
        {"ushort", PropType::UInt16}, {"uint16", PropType::UInt16},   {"int", PropType::Int32},
        {"int32", PropType::Int32},   {"uint", PropType::UInt32},     {"uint32", PropType::UInt32},
        {"float", PropType::Float32}, {"float32", PropType::Float32}, {"double", PropType::Float64},
        {"float64", PropType::Float64}};
    return names;
}

std::size_t type_size(PropType t) {
    switch (t) {
        case PropType::Int8:
        case PropType::UInt8: return 1;
        case PropType::Int16:
        case PropType::UInt16: return 2;
        case PropType::Int32:
        case PropType::UInt32:
        case PropType::Float32: return 4;
        case PropType::Float64: return 8;
    }
    return 0;
}

template <class T>
T load_as(const unsigned char* p) {
    T v;
    std::memcpy(&v, p, sizeof v);
    return v;
}

double decode(PropType t, const unsigned char* p) {
    switch (t) {
        case PropType::Int8: return load_as<std::int8_t>(p);
        case PropType::UInt8: return load_as<std::uint8_t>(p);
        case PropType::Int16: return load_as<std::int16_t>(p);
        case PropType::UInt16: return load_as<std::uint16_t>(p);
        case PropType::Int32: return load_as<std::int32_t>(p);
        case PropType::UInt32: return load_as<std::uint32_t>(p);
        case PropType::Float32: return load_as<float>(p);
        case PropType::Float64: return load_as<double>(p);
    }
    return 0.0;
}

struct Property {
    std::string name;
    PropType type;
    std::size_t offset;
};

struct Element {
    std::string name;
    std::size_t count = 0;
    std::vector<Property> props;
    std::size_t stride = 0;
};

[[noreturn]] void header_error(const std::string& msg, const std::string& field = "header") {
    throw Error(ErrorCode::MalformedHeader, "PLY: " + msg, field);
}

std::vector<std::string> rest_names(int n_rest) {
    std::vector<std::string> names;
    for (int i = 0; i < n_rest; ++i) names.push_back("f_rest_" + std::to_string(i));
    return names;
}

// Per-vertex property list in file order for a given SH degree.
std::vector<std::string> schema(int sh_degree) {
    std::vector<std::string> names = {"x", "y", "z", "nx", "ny", "nz", "f_dc_0", "f_dc_1", "f_dc_2"};
    for (auto& n : rest_names(3 * (sh_coeff_count(sh_degree) - 1))) names.push_back(n);
    for (const char* n : {"opacity", "scale_0", "scale_1", "scale_2", "rot_0", "rot_1", "rot_2", "rot_3",
                          "skew_0", "skew_1", "skew_2", "dir_0", "dir_1", "dir_2", "opacity2"})
        names.push_back(n);
    return names;
}

}  // namespace

void write_ply(const Scene& scene, std::ostream& out, PlyPrecision precision) {
    validate(scene);
    const int rest_per_channel = sh_coeff_count(scene.sh_degree) - 1;
    const std::vector<std::string> names = schema(scene.sh_degree);
    const char* type = precision == PlyPrecision::Float64 ? "double" : "float";

    out << "ply\nformat binary_little_endian 1.0\n";
    char bg[160];
    std::snprintf(bg, sizeof bg, "comment background %a %a %a\n", scene.background[0], scene.background[1],
                  scene.background[2]);
    out << bg;
    out << "element vertex " << scene.size() << "\n";
    for (const auto& n : names) out << "property " << type << " " << n << "\n";
    out << "end_header\n";

    std::vector<double> row;
    row.reserve(names.size());
    std::vector<unsigned char> bytes;
    for (const SkewGaussian& g : scene.primitives) {
        row.clear();
        for (int i = 0; i < 3; ++i) row.push_back(g.mu[i]);
        row.insert(row.end(), {0.0, 0.0, 0.0});
        for (int c = 0; c < 3; ++c) row.push_back(g.sh[0][c]);
        for (int c = 0; c < 3; ++c)
            for (int k = 1; k <= rest_per_channel; ++k) row.push_back(g.sh[k][c]);
        row.push_back(g.opacity_logits[0]);
        for (int i = 0; i < 3; ++i) row.push_back(g.log_scale[i]);
        for (int i = 0; i < 4; ++i) row.push_back(g.rot[i]);
        for (int i = 0; i < 3; ++i) row.push_back(g.beta[i]);
        for (int i = 0; i < 3; ++i) row.push_back(g.dir[i]);
        row.push_back(g.opacity_logits[1]);

        bytes.clear();
        for (double v : row) {
            if (precision == PlyPrecision::Float64) {
                const auto* p = reinterpret_cast<const unsigned char*>(&v);
                bytes.insert(bytes.end(), p, p + sizeof v);
            } else {
                const float f = static_cast<float>(v);
                const auto* p = reinterpret_cast<const unsigned char*>(&f);
                bytes.insert(bytes.end(), p, p + sizeof f);
            }
        }
        out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    }
    if (!out) throw Error(ErrorCode::Io, "PLY: write failed");
}

void save_ply(const Scene& scene, const std::filesystem::path& path, PlyPrecision precision) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorCode::Io, "cannot open " + path.string() + " for writing", path.string());
    write_ply(scene, out, precision);
}

Scene read_ply(std::istream& in) {
    std::string line;
    if (!std::getline(in, line) || (line != "ply" && line != "ply\r")) header_error("missing 'ply' magic");

    Scene scene;
    std::vector<Element> elements;
    bool format_seen = false;
    for (;;) {
        if (!std::getline(in, line)) header_error("header ends before end_header");
        if (!line.empty() && line.back() == '\r') line.pop_back();
        std::istringstream ls(line);
        std::string kw;
        ls >> kw;
        if (kw.empty() || kw == "obj_info") continue;
        if (kw == "end_header") break;
        if (kw == "comment") {
            std::string tag;
            ls >> tag;
            if (tag == "background") {
                std::string v[3];
                ls >> v[0] >> v[1] >> v[2];
                for (int c = 0; c < 3; ++c) {
                    char* end = nullptr;
                    const double d = std::strtod(v[c].c_str(), &end);
                    if (end == v[c].c_str()) header_error("bad background comment", "background");
                    scene.background[c] = d;
                }
            }
            continue;
        }
        if (kw == "format") {
            std::string fmt, ver;
            ls >> fmt >> ver;
            if (fmt == "ascii" || fmt == "binary_big_endian")
                throw Error(ErrorCode::UnsupportedFormat, "PLY: format '" + fmt + "' is not supported", "format");
            if (fmt != "binary_little_endian") header_error("unknown format '" + fmt + "'", "format");
            format_seen = true;
            continue;
        }
        if (kw == "element") {
            Element e;
            long long count = -1;
            ls >> e.name >> count;
            if (e.name.empty() || count < 0) header_error("bad element line: " + line, "element");
            e.count = static_cast<std::size_t>(count);
            elements.push_back(e);
            continue;
        }
        if (kw == "property") {
            if (elements.empty()) header_error("property before any element", "property");
            std::string type, name;
            ls >> type;
            if (type == "list") {
                ls >> type >> type >> name;
                if (elements.back().name == "vertex")
                    throw Error(ErrorCode::UnsupportedFormat, "PLY: list property in vertex element", name);
                elements.back().stride = SIZE_MAX;
                continue;
            }
            ls >> name;
            const auto it = type_names().find(type);
            if (it == type_names().end() || name.empty())
                header_error("bad property line: " + line, name.empty() ? "property" : name);
            Element& e = elements.back();
            e.props.push_back({name, it->second, e.stride});
            e.stride += type_size(it->second);
            continue;
        }
        header_error("unexpected header line: " + line);
    }
    if (!format_seen) header_error("missing format line", "format");

    const Element* vertex = nullptr;
    for (const Element& e : elements) {
        if (e.name == "vertex") {
            vertex = &e;
            break;
        }
        if (e.stride == SIZE_MAX)
            throw Error(ErrorCode::UnsupportedFormat, "PLY: list-valued element before vertex", e.name);
        in.ignore(static_cast<std::streamsize>(e.stride * e.count));
        if (static_cast<std::size_t>(in.gcount()) != e.stride * e.count)
            throw Error(ErrorCode::TruncatedPayload, "PLY: payload ends inside element " + e.name, e.name);
    }
    if (!vertex) throw Error(ErrorCode::MissingField, "PLY: no vertex element", "vertex");

    std::map<std::string, const Property*> by_name;
    for (const Property& p : vertex->props) by_name[p.name] = &p;
    auto find = [&](const std::string& n) -> const Property* {
        const auto it = by_name.find(n);
        return it == by_name.end() ? nullptr : it->second;
    };
    auto require = [&](const std::string& n) {
        const Property* p = find(n);
        if (!p) throw Error(ErrorCode::MissingField, "PLY: missing vertex property '" + n + "'", n);
        return p;
    };

    int n_rest = 0;
    while (find("f_rest_" + std::to_string(n_rest))) ++n_rest;
    int degree = 0;
    while (degree <= kMaxShDegree && 3 * (sh_coeff_count(degree) - 1) != n_rest) ++degree;
    if (degree > kMaxShDegree)
        header_error(std::to_string(n_rest) + " f_rest properties do not match an SH degree <= 3", "f_rest");
    scene.sh_degree = degree;
    const int rest_per_channel = sh_coeff_count(degree) - 1;

    const Property* pos[3] = {require("x"), require("y"), require("z")};
    const Property* dc[3] = {require("f_dc_0"), require("f_dc_1"), require("f_dc_2")};
    const Property* opacity = require("opacity");
    const Property* scale[3] = {require("scale_0"), require("scale_1"), require("scale_2")};
    const Property* rot[4] = {require("rot_0"), require("rot_1"), require("rot_2"), require("rot_3")};
    std::vector<const Property*> rest;
    for (const auto& n : rest_names(n_rest)) rest.push_back(find(n));
    const Property* skew[3] = {find("skew_0"), find("skew_1"), find("skew_2")};
    const Property* dir[3] = {find("dir_0"), find("dir_1"), find("dir_2")};
    const Property* opacity2 = find("opacity2");

    std::vector<unsigned char> buf(vertex->stride);
    scene.primitives.resize(vertex->count);
    for (std::size_t i = 0; i < vertex->count; ++i) {
        in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
        if (static_cast<std::size_t>(in.gcount()) != buf.size()) {
            // Name the first property that did not fully arrive.
            const std::size_t got = static_cast<std::size_t>(in.gcount());
            std::string field = vertex->props.front().name;
            for (const Property& p : vertex->props)
                if (p.offset + type_size(p.type) > got) {
                    field = p.name;
                    break;
                }
            throw Error(ErrorCode::TruncatedPayload,
                        "PLY: payload ends in vertex " + std::to_string(i) + " of " + std::to_string(vertex->count) +
                            " at property '" + field + "'",
                        field);
        }
        auto get = [&](const Property* p) { return p ? decode(p->type, buf.data() + p->offset) : 0.0; };
        SkewGaussian& g = scene.primitives[i];
        for (int k = 0; k < 3; ++k) {
            g.mu[k] = get(pos[k]);
            g.log_scale[k] = get(scale[k]);
            g.sh[0][k] = get(dc[k]);
            g.beta[k] = get(skew[k]);
            g.dir[k] = get(dir[k]);
        }
        for (int c = 0; c < 3; ++c)
            for (int k = 1; k <= rest_per_channel; ++k) g.sh[k][c] = get(rest[c * rest_per_channel + k - 1]);
        for (int k = 0; k < 4; ++k) g.rot[k] = get(rot[k]);
        g.opacity_logits[0] = get(opacity);
        g.opacity_logits[1] = opacity2 ? get(opacity2) : g.opacity_logits[0];
    }
    return scene;
}

Scene load_ply(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string(), path.string());
    return read_ply(in);
}

}  // namespace skewsplat
