#include "leafarea/dataset_io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

#include "json.hpp"

#include "leafarea/image_io.hpp"

namespace leafarea {

using nlohmann::json;
namespace fs = std::filesystem;

Mask rasterize_polygons(const std::vector<Polygon>& polygons, int width, int height) {
    Mask mask(width, height, 0);
    std::vector<double> xs;
    for (const Polygon& poly : polygons) {
        const std::size_t n = poly.size();
        if (n < 3) continue;
        for (int v = 0; v < height; ++v) {
            const double y = v + 0.5;
            xs.clear();
            for (std::size_t i = 0; i < n; ++i) {
                const Eigen::Vector2d& a = poly[i];
                const Eigen::Vector2d& b = poly[(i + 1) % n];
                if ((a.y() <= y) != (b.y() <= y))
                    xs.push_back(a.x() + (y - a.y()) * (b.x() - a.x()) / (b.y() - a.y()));
            }
            std::sort(xs.begin(), xs.end());
            for (std::size_t i = 0; i + 1 < xs.size(); i += 2) {
                // pixel centers u + 0.5 in [x0, x1)
                const int u0 = std::max(0, static_cast<int>(std::ceil(xs[i] - 0.5)));
                const int u1 = std::min(width, static_cast<int>(std::ceil(xs[i + 1] - 0.5)));
                for (int u = u0; u < u1; ++u) mask(u, v) = 1;
            }
        }
    }
    return mask;
}

const FrameDescriptor& Dataset::frame(std::int64_t image_id) const {
    auto it = frames.find(image_id);
    if (it == frames.end())
        fail(ErrorKind::InvalidArgument, "unknown image_id " + std::to_string(image_id));
    return it->second;
}

RgbdFrame Dataset::load_frame(std::int64_t image_id) const {
    const FrameDescriptor& fd = frame(image_id);
    RgbdFrame f;
    f.color = read_color_png(root / fd.file_name);
    f.depth = read_depth_png(root / fd.depth_file_name);
    f.depth_scale = fd.depth_scale;
    f.intrinsics = fd.intrinsics;
    if (!f.color.same_shape(f.depth))
        fail(ErrorKind::Format, "depth/color dimension mismatch for image " +
                                    std::to_string(image_id));
    f.validate();
    return f;
}

namespace {

[[noreturn]] void format_error(const std::string& what) { fail(ErrorKind::Format, what); }

double number_field(const json& obj, const char* key, const std::string& ctx) {
    auto it = obj.find(key);
    if (it == obj.end() || !it->is_number()) format_error(ctx + ": '" + key + "' missing or not a number");
    return it->get<double>();
}

CameraIntrinsics parse_intrinsics(const json& j, int width, int height) {
    CameraIntrinsics k;
    k.fx = number_field(j, "fx", "intrinsics");
    k.fy = number_field(j, "fy", "intrinsics");
    k.cx = number_field(j, "cx", "intrinsics");
    k.cy = number_field(j, "cy", "intrinsics");
    k.width = width;
    k.height = height;
    return k;
}

SplitTag parse_split(const std::string& s) {
    if (s == "train") return SplitTag::Train;
    if (s == "val") return SplitTag::Val;
    if (s == "test") return SplitTag::Test;
    format_error("unknown split tag '" + s + "'");
}

Dataset parse_dataset(const json& doc, const fs::path& root);

const char* split_name(SplitTag t) {
    switch (t) {
        case SplitTag::Train: return "train";
        case SplitTag::Val: return "val";
        case SplitTag::Test: return "test";
    }
    return "train";
}

}  // namespace

Dataset load_dataset(const fs::path& annotation_path) {
    std::ifstream in(annotation_path);
    if (!in) fail(ErrorKind::Io, "cannot open annotation file " + annotation_path.string());
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::parse_error& e) {
        format_error(std::string("malformed annotation JSON: ") + e.what());
    }
    if (!doc.is_object() || !doc.contains("images") || !doc["images"].is_array())
        format_error("annotation JSON lacks an 'images' array");
    try {
        return parse_dataset(doc, annotation_path.parent_path());
    } catch (const json::exception& e) {
        format_error(annotation_path.filename().string() + ": " + e.what());
    }
}

namespace {

Dataset parse_dataset(const json& doc, const fs::path& root) {
    Dataset ds;
    ds.root = root;
    if (doc.contains("split")) ds.split = parse_split(doc["split"].get<std::string>());
    const json* shared_intrinsics =
        doc.contains("camera_intrinsics") ? &doc["camera_intrinsics"] : nullptr;

    for (const json& img : doc["images"]) {
        FrameDescriptor fd;
        if (!img.contains("id")) format_error("image entry without 'id'");
        fd.image_id = img["id"].get<std::int64_t>();
        const std::string ctx = "image " + std::to_string(fd.image_id);
        if (!img.contains("file_name") || !img.contains("depth_file_name"))
            format_error(ctx + ": 'file_name' and 'depth_file_name' are required");
        fd.file_name = img["file_name"].get<std::string>();
        fd.depth_file_name = img["depth_file_name"].get<std::string>();
        if (!img.contains("depth_scale")) format_error(ctx + ": depth_scale absent");
        fd.depth_scale = number_field(img, "depth_scale", ctx);
        if (!(fd.depth_scale > 0)) format_error(ctx + ": depth_scale must be > 0");

        const fs::path color_path = ds.root / fd.file_name;
        const fs::path depth_path = ds.root / fd.depth_file_name;
        if (!fs::exists(color_path)) fail(ErrorKind::Io, ctx + ": missing " + color_path.string());
        if (!fs::exists(depth_path)) fail(ErrorKind::Io, ctx + ": missing " + depth_path.string());
        const ImageSize cs = png_info(color_path);
        const ImageSize dsz = png_info(depth_path);
        if (cs.width != dsz.width || cs.height != dsz.height)
            format_error(ctx + ": depth/color dimension mismatch");
        if (img.contains("width") && img.contains("height") &&
            (img["width"].get<int>() != cs.width || img["height"].get<int>() != cs.height))
            format_error(ctx + ": declared size differs from image file");

        if (img.contains("intrinsics"))
            fd.intrinsics = parse_intrinsics(img["intrinsics"], cs.width, cs.height);
        else if (shared_intrinsics)
            fd.intrinsics = parse_intrinsics(*shared_intrinsics, cs.width, cs.height);
        else
            format_error(ctx + ": camera intrinsics absent");
        try {
            fd.intrinsics.validate();
        } catch (const Error& e) {
            format_error(ctx + ": " + e.what());
        }
        if (!ds.frames.emplace(fd.image_id, fd).second)
            format_error("duplicate image id " + std::to_string(fd.image_id));
    }

    if (doc.contains("annotations")) {
        for (const json& ann : doc["annotations"]) {
            AnnotatedInstance inst;
            inst.instance_id = ann.at("id").get<std::int64_t>();
            inst.image_id = ann.at("image_id").get<std::int64_t>();
            const std::string ctx = "annotation " + std::to_string(inst.instance_id);
            auto fit = ds.frames.find(inst.image_id);
            if (fit == ds.frames.end()) format_error(ctx + ": image_id does not resolve");
            if (ann.contains("category_id")) inst.category = ann["category_id"].get<std::int64_t>();
            if (ann.contains("leaf_area_cm2") && !ann["leaf_area_cm2"].is_null()) {
                inst.gt_area_cm2 = ann["leaf_area_cm2"].get<double>();
                if (!(inst.gt_area_cm2 >= 0.0 || inst.gt_area_cm2 == kUnknownArea))
                    format_error(ctx + ": leaf_area_cm2 must be >= 0 or -1");
            }
            const json& seg = ann.at("segmentation");
            if (!seg.is_array() || seg.empty()) format_error(ctx + ": polygon segmentation required");
            for (const json& flat : seg) {
                if (!flat.is_array() || flat.size() % 2 != 0)
                    format_error(ctx + ": malformed polygon");
                if (flat.size() < 6) format_error(ctx + ": degenerate polygon");
                Polygon poly;
                for (std::size_t i = 0; i < flat.size(); i += 2)
                    poly.emplace_back(flat[i].get<double>(), flat[i + 1].get<double>());
                inst.polygons.push_back(std::move(poly));
            }
            const CameraIntrinsics& k = fit->second.intrinsics;
            inst.bitmask = rasterize_polygons(inst.polygons, k.width, k.height);
            if (count_set(inst.bitmask) == 0)
                format_error(ctx + ": degenerate polygon (covers no pixel center)");
            ds.instances.push_back(std::move(inst));
        }
    }
    return ds;
}

}  // namespace

void save_annotations(const Dataset& dataset, const fs::path& annotation_path) {
    json doc;
    doc["split"] = split_name(dataset.split);
    doc["images"] = json::array();
    for (const auto& [id, fd] : dataset.frames) {
        doc["images"].push_back({
            {"id", id},
            {"file_name", fd.file_name},
            {"depth_file_name", fd.depth_file_name},
            {"width", fd.intrinsics.width},
            {"height", fd.intrinsics.height},
            {"depth_scale", fd.depth_scale},
            {"intrinsics",
             {{"fx", fd.intrinsics.fx},
              {"fy", fd.intrinsics.fy},
              {"cx", fd.intrinsics.cx},
              {"cy", fd.intrinsics.cy}}},
        });
    }
    doc["annotations"] = json::array();
    for (const AnnotatedInstance& inst : dataset.instances) {
        json seg = json::array();
        double xmin = 1e300, ymin = 1e300, xmax = -1e300, ymax = -1e300;
        for (const Polygon& poly : inst.polygons) {
            json flat = json::array();
            for (const auto& p : poly) {
                flat.push_back(p.x());
                flat.push_back(p.y());
                xmin = std::min(xmin, p.x());
                xmax = std::max(xmax, p.x());
                ymin = std::min(ymin, p.y());
                ymax = std::max(ymax, p.y());
            }
            seg.push_back(std::move(flat));
        }
        doc["annotations"].push_back({
            {"id", inst.instance_id},
            {"image_id", inst.image_id},
            {"category_id", inst.category},
            {"segmentation", std::move(seg)},
            {"bbox", {xmin, ymin, xmax - xmin, ymax - ymin}},
            {"area", count_set(inst.bitmask)},
            {"iscrowd", 0},
            {"leaf_area_cm2", inst.gt_area_cm2},
        });
    }
    doc["categories"] = json::array({{{"id", 1}, {"name", "leaf"}}});

    std::ofstream out(annotation_path);
    if (!out) fail(ErrorKind::Io, "cannot write " + annotation_path.string());
    out << doc.dump(1) << '\n';
}

Dataset subset(const Dataset& dataset, const std::vector<std::int64_t>& image_ids, SplitTag tag) {
    Dataset out;
    out.root = dataset.root;
    out.split = tag;
    const std::set<std::int64_t> keep(image_ids.begin(), image_ids.end());
    for (std::int64_t id : keep) out.frames.emplace(id, dataset.frame(id));
    for (const AnnotatedInstance& inst : dataset.instances)
        if (keep.count(inst.image_id)) out.instances.push_back(inst);
    return out;
}

std::vector<Fold> kfold_split(const Dataset& dataset, int k, std::uint64_t seed) {
    require(k >= 2, "kfold_split: k must be >= 2");
    std::vector<std::int64_t> ids;
    for (const auto& [id, fd] : dataset.frames) ids.push_back(id);
    if (static_cast<std::size_t>(k) > ids.size())
        fail(ErrorKind::InvalidArgument, "kfold_split: k exceeds image count");

    // Fisher-Yates with an explicitly specified generator so folds are identical
    // across standard-library implementations.
    std::mt19937_64 rng(seed);
    for (std::size_t i = ids.size(); i > 1; --i) {
        const std::size_t j = static_cast<std::size_t>(rng() % i);
        std::swap(ids[i - 1], ids[j]);
    }

    const std::size_t n = ids.size();
    const std::size_t base = n / k, extra = n % k;
    std::vector<Fold> folds;
    std::size_t offset = 0;
    for (int f = 0; f < k; ++f) {
        const std::size_t len = base + (static_cast<std::size_t>(f) < extra ? 1 : 0);
        std::vector<std::int64_t> val(ids.begin() + offset, ids.begin() + offset + len);
        std::vector<std::int64_t> train(ids.begin(), ids.begin() + offset);
        train.insert(train.end(), ids.begin() + offset + len, ids.end());
        folds.push_back({subset(dataset, train, SplitTag::Train),
                         subset(dataset, val, SplitTag::Val)});
        offset += len;
    }
    return folds;
}

std::string format_real(double v) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof buf, v);
    std::string s(buf, res.ptr);
    if (s.find_first_of(".eEn") == std::string::npos) s += ".0";
    return s;
}

std::string results_to_csv(const std::vector<ResultRow>& rows) {
    std::ostringstream out;
    out << kResultsHeader << '\n';
    for (const ResultRow& r : rows) {
        out << r.image_id << ',' << r.instance_id << ','
            << (r.pred_area_cm2 ? format_real(*r.pred_area_cm2) : "") << ','
            << format_real(r.gt_area_cm2) << ',' << format_real(r.ioa) << ','
            << format_real(r.confidence) << ','
            << (r.distance_m ? format_real(*r.distance_m) : "") << ',';
        // errors are free text; keep the row parseable
        for (char c : r.error) out << (c == ',' || c == '\n' || c == '\r' ? ';' : c);
        out << '\n';
    }
    return out.str();
}

void write_results(const std::vector<ResultRow>& rows, const fs::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) fail(ErrorKind::Io, "cannot write results to " + path.string());
    out << results_to_csv(rows);
    if (!out) fail(ErrorKind::Io, "failed writing " + path.string());
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            out.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur.push_back(c);
        }
    }
    out.push_back(cur);
    return out;
}

double parse_real(const std::string& s, const std::string& ctx) {
    double v = 0;
    auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size())
        fail(ErrorKind::Format, ctx + ": not a number '" + s + "'");
    return v;
}

std::int64_t parse_int(const std::string& s, const std::string& ctx) {
    std::int64_t v = 0;
    auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size())
        fail(ErrorKind::Format, ctx + ": not an integer '" + s + "'");
    return v;
}

}  // namespace

std::vector<ResultRow> read_results(const fs::path& path) {
    std::ifstream in(path);
    if (!in) fail(ErrorKind::Io, "cannot open results " + path.string());
    std::string line;
    if (!std::getline(in, line)) fail(ErrorKind::Format, "results CSV is empty");
    const auto header = split_csv_line(line);
    std::map<std::string, std::size_t> col;
    for (std::size_t i = 0; i < header.size(); ++i) col[header[i]] = i;
    for (const char* name : {"image_id", "instance_id", "pred_area_cm2", "gt_area_cm2", "ioa",
                             "confidence", "distance_m"})
        if (!col.count(name))
            fail(ErrorKind::Format, std::string("results CSV lacks column ") + name);

    std::vector<ResultRow> rows;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line == "\r") continue;
        const auto f = split_csv_line(line);
        const std::string ctx = path.filename().string() + ":" + std::to_string(lineno);
        if (f.size() < header.size()) fail(ErrorKind::Format, ctx + ": too few fields");
        ResultRow r;
        r.image_id = parse_int(f[col["image_id"]], ctx);
        r.instance_id = parse_int(f[col["instance_id"]], ctx);
        if (const auto& s = f[col["pred_area_cm2"]]; !s.empty()) r.pred_area_cm2 = parse_real(s, ctx);
        r.gt_area_cm2 = parse_real(f[col["gt_area_cm2"]], ctx);
        r.ioa = parse_real(f[col["ioa"]], ctx);
        r.confidence = parse_real(f[col["confidence"]], ctx);
        if (const auto& s = f[col["distance_m"]]; !s.empty()) r.distance_m = parse_real(s, ctx);
        if (col.count("error")) r.error = f[col["error"]];
        rows.push_back(std::move(r));
    }
    return rows;
}

}  // namespace leafarea
