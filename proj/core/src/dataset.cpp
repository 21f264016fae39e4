#include <skewsplat/fit.hpp>
#include <skewsplat/metrics.hpp>

#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace skewsplat {

namespace {

using nlohmann::json;

std::string entry_name(std::size_t i) { return "frames[" + std::to_string(i) + "]"; }

[[noreturn]] void entry_error(std::size_t i, const std::string& what) {
    throw Error(ErrorCode::Parse, entry_name(i) + ": " + what, entry_name(i));
}

CameraFrame parse_frame(const json& j, std::size_t i) {
    if (!j.is_object()) entry_error(i, "entry is not an object");
    CameraFrame f;
    if (j.contains("file")) {
        if (!j["file"].is_string()) entry_error(i, "'file' must be a string");
        f.file = j["file"].get<std::string>();
    }

    if (!j.contains("c2w")) entry_error(i, "missing 'c2w'");
    const json& m = j["c2w"];
    if (!m.is_array() || m.size() != 16) entry_error(i, "'c2w' must be an array of 16 numbers");
    for (int k = 0; k < 16; ++k) {
        if (!m[k].is_number()) entry_error(i, "'c2w' must be an array of 16 numbers");
        f.view.c2w(k / 4, k % 4) = m[k].get<double>();
    }

    const std::string conv = j.value("convention", std::string("opencv"));
    const auto c = parse_convention(conv);
    if (!c) entry_error(i, "unknown convention '" + conv + "'");
    f.view.convention = *c;

    for (const char* key : {"fov_x", "width", "height"})
        if (!j.contains(key) || !j[key].is_number()) entry_error(i, std::string("missing or non-numeric '") + key + "'");
    f.view.fov_x = j["fov_x"].get<double>();
    if (!j["width"].is_number_integer() || !j["height"].is_number_integer())
        entry_error(i, "'width' and 'height' must be integers");
    f.view.width = j["width"].get<int>();
    f.view.height = j["height"].get<int>();
    if (j.contains("near")) f.view.near = j["near"].get<double>();
    if (j.contains("far")) f.view.far = j["far"].get<double>();

    try {
        validate(f.view);
    } catch (const Error& e) {
        entry_error(i, e.what());
    }
    return f;
}

std::string read_text(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string(), path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace

std::vector<CameraFrame> parse_camera_json(const std::string& text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        throw Error(ErrorCode::Parse, std::string("camera file is not valid JSON: ") + e.what());
    }
    const json* frames = &doc;
    if (doc.is_object()) {
        if (!doc.contains("frames")) throw Error(ErrorCode::MissingField, "camera file has no 'frames' array", "frames");
        frames = &doc["frames"];
    }
    if (!frames->is_array()) throw Error(ErrorCode::Parse, "'frames' must be an array", "frames");
    std::vector<CameraFrame> out;
    out.reserve(frames->size());
    for (std::size_t i = 0; i < frames->size(); ++i) out.push_back(parse_frame((*frames)[i], i));
    return out;
}

std::vector<CameraFrame> load_camera_file(const std::filesystem::path& path) {
    return parse_camera_json(read_text(path));
}

std::string camera_json(const std::vector<CameraFrame>& frames) {
    json arr = json::array();
    for (const auto& f : frames) {
        json m = json::array();
        for (int k = 0; k < 16; ++k) m.push_back(f.view.c2w(k / 4, k % 4));
        json e = {{"c2w", m},
                  {"convention", std::string(to_string(f.view.convention))},
                  {"fov_x", f.view.fov_x},
                  {"width", f.view.width},
                  {"height", f.view.height}};
        if (!f.file.empty()) e["file"] = f.file;
        arr.push_back(std::move(e));
    }
    return json{{"frames", arr}}.dump(2) + "\n";
}

void save_camera_file(const std::vector<CameraFrame>& frames, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string(), path.string());
    out << camera_json(frames);
    if (!out) throw Error(ErrorCode::Io, "write failed for " + path.string(), path.string());
}

Dataset split_views(std::vector<TrainView> views) {
    Dataset d;
    for (std::size_t i = 0; i < views.size(); ++i) (i % 8 == 0 ? d.test : d.train).push_back(std::move(views[i]));
    return d;
}

Dataset load_dataset(const std::filesystem::path& dir) {
    if (!std::filesystem::is_directory(dir))
        throw Error(ErrorCode::Io, "dataset directory not found: " + dir.string(), dir.string());
    const auto cam_path = dir / "cameras.json";
    if (!std::filesystem::exists(cam_path))
        throw Error(ErrorCode::Io, "dataset has no cameras.json: " + dir.string(), cam_path.string());
    const auto frames = load_camera_file(cam_path);
    if (frames.empty()) throw Error(ErrorCode::InvalidArgument, "dataset lists no frames", "frames");
    if (frames.size() < 2)
        throw Error(ErrorCode::InvalidArgument, "dataset needs at least two frames (one train, one test)", "frames");

    std::vector<TrainView> views;
    for (std::size_t i = 0; i < frames.size(); ++i) {
        if (frames[i].file.empty()) entry_error(i, "missing 'file'");
        Image img = load_png(dir / frames[i].file);
        if (img.width != frames[i].view.width || img.height != frames[i].view.height)
            throw Error(ErrorCode::DimensionMismatch,
                        entry_name(i) + ": image is " + std::to_string(img.width) + "x" + std::to_string(img.height) +
                            ", camera says " + std::to_string(frames[i].view.width) + "x" +
                            std::to_string(frames[i].view.height),
                        entry_name(i));
        views.push_back({to_opencv(frames[i].view), std::move(img)});
    }
    return split_views(std::move(views));
}

EvalResult evaluate(const Scene& scene, const std::vector<TrainView>& views, const RenderConfig& render) {
    EvalResult r;
    for (const auto& v : views) {
        const Image img = render_image(scene, v.camera, render);
        r.psnr += psnr(img, v.image);
        r.ssim += ssim(img, v.image);
    }
    r.n_views = views.size();
    if (r.n_views > 0) {
        r.psnr /= static_cast<double>(r.n_views);
        r.ssim /= static_cast<double>(r.n_views);
    }
    return r;
}

std::vector<std::filesystem::path> render_trajectory(const Scene& scene, const std::vector<CameraFrame>& frames,
                                                     const std::filesystem::path& out_dir,
                                                     const RenderConfig& render) {
    std::filesystem::create_directories(out_dir);
    std::vector<std::filesystem::path> paths;
    for (std::size_t i = 0; i < frames.size(); ++i) {
        char name[32];
        std::snprintf(name, sizeof(name), "frame_%05zu.png", i);
        Image img;
        try {
            img = render_image(scene, to_opencv(frames[i].view), render);
        } catch (const Error& e) {
            throw Error(e.code(), entry_name(i) + ": " + e.what(), entry_name(i));
        }
        save_png(img, out_dir / name);
        paths.push_back(out_dir / name);
    }
    return paths;
}

std::string log_entry_json(const TrainLogEntry& e) {
    json j = {{"iteration", e.iteration},   {"loss", e.loss},         {"psnr", e.psnr},
              {"n_primitives", e.n_primitives}, {"n_cloned", e.n_cloned}, {"n_split", e.n_split},
              {"n_pruned", e.n_pruned}};
    return j.dump();
}

}  // namespace skewsplat
