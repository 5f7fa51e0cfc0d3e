#include "leafarea3d/leafarea3d.h"

#include <cstdlib>
#include <cstring>
#include <fstream>
#include <new>
#include <sstream>
#include <string>

#include "leafarea/area_head.hpp"
#include "leafarea/batch.hpp"
#include "leafarea/image_io.hpp"

using namespace leafarea;
namespace fs = std::filesystem;

struct la3d_dataset {
    Dataset value;
};
struct la3d_depth {
    DepthRaster value;
};
struct la3d_mesh {
    TriangleMesh value;
};
struct la3d_area_head {
    AreaHeadParams value;
};

namespace {

thread_local std::string g_last_error;

la3d_status status_of(ErrorKind k) {
    switch (k) {
        case ErrorKind::InvalidArgument: return LA3D_ERR_INVALID_ARGUMENT;
        case ErrorKind::Io: return LA3D_ERR_IO;
        case ErrorKind::Format: return LA3D_ERR_FORMAT;
        case ErrorKind::Degenerate: return LA3D_ERR_DEGENERATE;
        case ErrorKind::Numeric: return LA3D_ERR_NUMERIC;
    }
    return LA3D_ERR_INTERNAL;
}

template <typename F>
la3d_status guard(F&& fn) {
    g_last_error.clear();
    try {
        fn();
        return LA3D_OK;
    } catch (const Error& e) {
        g_last_error = e.what();
        return status_of(e.kind());
    } catch (const std::bad_alloc&) {
        g_last_error = "out of memory";
    } catch (const std::exception& e) {
        g_last_error = e.what();
    } catch (...) {
        g_last_error = "unknown error";
    }
    return LA3D_ERR_INTERNAL;
}

void need(const void* p, const char* name) {
    if (!p) fail(ErrorKind::InvalidArgument, std::string(name) + " must not be NULL");
}

char* dup_string(const std::string& s) {
    char* out = static_cast<char*>(std::malloc(s.size() + 1));
    if (!out) throw std::bad_alloc();
    std::memcpy(out, s.c_str(), s.size() + 1);
    return out;
}

std::string text_or_empty(const char* s) { return s ? s : ""; }

void write_text(const char* path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) fail(ErrorKind::Io, std::string("cannot write ") + path);
    out << text;
    if (!out) fail(ErrorKind::Io, std::string("failed writing ") + path);
}

FeatureMap make_features(const double* data, int c, int h, int w) {
    need(data, "features");
    require(c >= 1 && h >= 1 && w >= 1, "feature dimensions must be positive");
    FeatureMap f;
    f.height = h;
    f.width = w;
    f.data.resize(c, static_cast<Eigen::Index>(h) * w);
    for (int ch = 0; ch < c; ++ch)
        for (int i = 0; i < h * w; ++i) f.data(ch, i) = data[static_cast<std::size_t>(ch) * h * w + i];
    return f;
}

InstanceMask make_mask(const double* data, int h, int w) {
    need(data, "mask");
    InstanceMask m;
    m.height = h;
    m.width = w;
    m.values = Eigen::Map<const Eigen::RowVectorXd>(data, static_cast<Eigen::Index>(h) * w);
    return m;
}

std::vector<int> parse_shape(const char* text) {
    std::vector<int> dims;
    std::stringstream ss(text);
    for (std::string tok; std::getline(ss, tok, ',');) {
        try {
            dims.push_back(std::stoi(tok));
        } catch (const std::exception&) {
            fail(ErrorKind::InvalidArgument, std::string("bad shape '") + text + "'");
        }
    }
    return dims;
}

}  // namespace

extern "C" {

const char* la3d_version(void) { return "0.1.0"; }

const char* la3d_status_name(la3d_status s) {
    switch (s) {
        case LA3D_OK: return "ok";
        case LA3D_ERR_INVALID_ARGUMENT: return "invalid argument";
        case LA3D_ERR_IO: return "i/o error";
        case LA3D_ERR_FORMAT: return "format error";
        case LA3D_ERR_DEGENERATE: return "degenerate input";
        case LA3D_ERR_NUMERIC: return "numeric failure";
        case LA3D_ERR_INTERNAL: return "internal error";
    }
    return "unknown status";
}

const char* la3d_last_error(void) { return g_last_error.c_str(); }

void la3d_string_free(char* s) { std::free(s); }
void la3d_buffer_free(void* p) { std::free(p); }

la3d_status la3d_dataset_load(const char* path, la3d_dataset** out) {
    return guard([&] {
        need(path, "path");
        need(out, "out");
        *out = new la3d_dataset{load_dataset(path)};
    });
}

void la3d_dataset_free(la3d_dataset* ds) { delete ds; }

la3d_status la3d_dataset_counts(const la3d_dataset* ds, size_t* images, size_t* instances) {
    return guard([&] {
        need(ds, "dataset");
        if (images) *images = ds->value.frames.size();
        if (instances) *instances = ds->value.instances.size();
    });
}

la3d_status la3d_depth_create(int width, int height, const uint16_t* data, la3d_depth** out) {
    return guard([&] {
        need(out, "out");
        require(width >= 1 && height >= 1, "depth raster must be non-empty");
        DepthRaster r(width, height);
        if (data) std::memcpy(r.data().data(), data, r.size() * sizeof(std::uint16_t));
        *out = new la3d_depth{std::move(r)};
    });
}

la3d_status la3d_depth_read_png(const char* path, la3d_depth** out) {
    return guard([&] {
        need(path, "path");
        need(out, "out");
        *out = new la3d_depth{read_depth_png(path)};
    });
}

la3d_status la3d_depth_write_png(const la3d_depth* depth, const char* path) {
    return guard([&] {
        need(depth, "depth");
        need(path, "path");
        write_depth_png(path, depth->value);
    });
}

la3d_status la3d_depth_size(const la3d_depth* depth, int* width, int* height) {
    return guard([&] {
        need(depth, "depth");
        if (width) *width = depth->value.width();
        if (height) *height = depth->value.height();
    });
}

const uint16_t* la3d_depth_data(const la3d_depth* depth) {
    return depth ? depth->value.data().data() : nullptr;
}

void la3d_depth_free(la3d_depth* depth) { delete depth; }

la3d_status la3d_bilateral_filter(const la3d_depth* in, int diameter, double sigma_color,
                                  double sigma_space, la3d_depth** out) {
    return guard([&] {
        need(in, "depth");
        need(out, "out");
        *out = new la3d_depth{bilateral_filter(in->value, {diameter, sigma_color, sigma_space})};
    });
}

la3d_status la3d_median_filter(const la3d_depth* in, int kernel, la3d_depth** out) {
    return guard([&] {
        need(in, "depth");
        need(out, "out");
        *out = new la3d_depth{median_filter(in->value, kernel)};
    });
}

la3d_status la3d_estimate_instance(const la3d_dataset* ds, int64_t instance_id, const char* config_json,
                                   double* area_cm2, double* distance_m, la3d_mesh** mesh_out) {
    return guard([&] {
        need(ds, "dataset");
        const PipelineConfig cfg = pipeline_config_from_json(text_or_empty(config_json));
        const AnnotatedInstance* inst = nullptr;
        for (const AnnotatedInstance& i : ds->value.instances)
            if (i.instance_id == instance_id) inst = &i;
        if (!inst) fail(ErrorKind::InvalidArgument, "unknown instance id " + std::to_string(instance_id));
        const RgbdFrame frame = ds->value.load_frame(inst->image_id);
        AreaEstimate est = estimate_leaf_area_ip(frame, inst->bitmask, cfg);
        if (area_cm2) *area_cm2 = est.area_cm2;
        if (distance_m) *distance_m = est.diagnostics.distance_m;
        if (mesh_out) *mesh_out = new la3d_mesh{std::move(est.mesh)};
    });
}

la3d_status la3d_mesh_info(const la3d_mesh* mesh, size_t* vertices, size_t* triangles, double* area_m2) {
    return guard([&] {
        need(mesh, "mesh");
        if (vertices) *vertices = mesh->value.vertices.size();
        if (triangles) *triangles = mesh->value.triangles.size();
        if (area_m2) *area_m2 = surface_area(mesh->value);
    });
}

la3d_status la3d_mesh_write(const la3d_mesh* mesh, const char* path) {
    return guard([&] {
        need(mesh, "mesh");
        need(path, "path");
        const fs::path p(path);
        if (p.extension() == ".ply")
            write_ply(mesh->value, p);
        else if (p.extension() == ".obj")
            write_obj(mesh->value, p);
        else
            fail(ErrorKind::InvalidArgument, "mesh path must end in .ply or .obj");
    });
}

void la3d_mesh_free(la3d_mesh* mesh) { delete mesh; }

la3d_status la3d_run_estimate(const char* dataset_path, const char* config_json, int workers,
                              const char* out_csv, size_t* n_rows, size_t* n_errors) {
    return guard([&] {
        need(dataset_path, "dataset_path");
        need(out_csv, "out_csv");
        const PipelineConfig cfg = pipeline_config_from_json(text_or_empty(config_json));
        const Dataset ds = load_dataset(dataset_path);
        const std::vector<ResultRow> rows = estimate_dataset(ds, cfg, workers);
        write_results(rows, out_csv);
        if (n_rows) *n_rows = rows.size();
        if (n_errors) {
            *n_errors = 0;
            for (const ResultRow& r : rows) *n_errors += !r.error.empty();
        }
    });
}

la3d_status la3d_run_eval(const char* predictions_path, const char* gt_dataset_path, double ioa_threshold,
                          double min_confidence, const char* out_json, const char* out_bins_csv,
                          char** report_out) {
    return guard([&] {
        need(predictions_path, "predictions_path");
        need(gt_dataset_path, "gt_dataset_path");
        require(ioa_threshold >= 0 && ioa_threshold <= 1, "ioa threshold must lie in [0, 1]");
        require(min_confidence >= 0 && min_confidence <= 1, "min confidence must lie in [0, 1]");
        const Dataset gt = load_dataset(gt_dataset_path);
        const fs::path pred(predictions_path);
        const EvalReport rep =
            pred.extension() == ".json"
                ? evaluate_prediction_file(pred, gt, ioa_threshold, min_confidence)
                : evaluate_results(read_results(pred), gt, ioa_threshold, min_confidence);
        const std::string json = report_to_json(rep) + "\n";
        if (out_json) write_text(out_json, json);
        if (out_bins_csv) write_text(out_bins_csv, bins_to_csv(rep.distance_bins));
        if (report_out) *report_out = dup_string(json);
    });
}

la3d_status la3d_run_crossval(const char* dataset_path, int k, uint64_t seed, const char* config_json,
                              int workers, const char* out_json, const char* out_csv, char** summary_out) {
    return guard([&] {
        need(dataset_path, "dataset_path");
        const PipelineConfig cfg = pipeline_config_from_json(text_or_empty(config_json));
        const Dataset ds = load_dataset(dataset_path);
        const CrossvalResult res = run_crossval(ds, k, seed, cfg, workers);
        const std::string json = crossval_to_json(res) + "\n";
        if (out_json) write_text(out_json, json);
        if (out_csv) write_results(res.rows, out_csv);
        if (summary_out) *summary_out = dup_string(json);
    });
}

la3d_status la3d_run_synth(const char* synth_json, const char* out_dir, char** annotation_path_out) {
    return guard([&] {
        need(out_dir, "out_dir");
        const SynthConfig cfg = synth_config_from_json(text_or_empty(synth_json));
        const fs::path ann = generate_dataset(cfg, out_dir);
        if (annotation_path_out) *annotation_path_out = dup_string(ann.string());
    });
}

la3d_status la3d_area_head_load(const char* weights_path, la3d_area_head** out) {
    return guard([&] {
        need(weights_path, "weights_path");
        need(out, "out");
        *out = new la3d_area_head{load_area_head(weights_path)};
    });
}

la3d_status la3d_area_head_from_json(const char* weights_json, la3d_area_head** out) {
    return guard([&] {
        need(weights_json, "weights_json");
        need(out, "out");
        *out = new la3d_area_head{area_head_from_json(weights_json)};
    });
}

la3d_status la3d_area_head_random(const int* widths, size_t n_widths, uint64_t seed, la3d_area_head** out) {
    return guard([&] {
        need(widths, "widths");
        need(out, "out");
        *out = new la3d_area_head{random_area_head(std::vector<int>(widths, widths + n_widths), seed)};
    });
}

la3d_status la3d_area_head_to_json(const la3d_area_head* head, char** json_out) {
    return guard([&] {
        need(head, "head");
        need(json_out, "json_out");
        *json_out = dup_string(area_head_to_json(head->value));
    });
}

void la3d_area_head_free(la3d_area_head* head) { delete head; }

la3d_status la3d_area_head_forward(const la3d_area_head* head, const double* features, int channels,
                                   int height, int width, const double* mask, double* area_out,
                                   double* map_out) {
    return guard([&] {
        need(head, "head");
        const AreaHeadOutput out = area_head_forward(make_features(features, channels, height, width),
                                                     make_mask(mask, height, width), head->value);
        if (area_out) *area_out = out.area;
        if (map_out) std::memcpy(map_out, out.map.data(), sizeof(double) * out.map.size());
    });
}

la3d_status la3d_area_head_loss(const la3d_area_head* head, double pred, double gt, double* loss_out) {
    return guard([&] {
        need(head, "head");
        need(loss_out, "loss_out");
        *loss_out = area_loss(pred, gt, head->value.loss, head->value.huber_delta);
    });
}

la3d_status la3d_area_head_grad_check(const la3d_area_head* head, const double* features, int channels,
                                      int height, int width, const double* mask, double gt, double step,
                                      double* max_rel_error, size_t* checked, size_t* excluded) {
    return guard([&] {
        need(head, "head");
        const GradCheckResult r = grad_check(head->value, make_features(features, channels, height, width),
                                             make_mask(mask, height, width), gt, step);
        if (max_rel_error) *max_rel_error = r.max_rel_error;
        if (checked) *checked = r.checked;
        if (excluded) *excluded = r.excluded;
    });
}

la3d_status la3d_load_features(const char* path, const char* shape, double** data, int* channels,
                               int* height, int* width) {
    return guard([&] {
        need(path, "path");
        need(data, "data");
        std::optional<std::vector<int>> dims;
        if (shape && *shape) dims = parse_shape(shape);
        const FeatureMap f = load_features(path, dims);
        double* buf = static_cast<double*>(std::malloc(sizeof(double) * f.data.size()));
        if (!buf) throw std::bad_alloc();
        for (int c = 0; c < f.channels(); ++c)
            for (int i = 0; i < f.pixels(); ++i) buf[static_cast<std::size_t>(c) * f.pixels() + i] = f.data(c, i);
        *data = buf;
        if (channels) *channels = f.channels();
        if (height) *height = f.height;
        if (width) *width = f.width;
    });
}

la3d_status la3d_load_mask(const char* path, double** data, int* height, int* width) {
    return guard([&] {
        need(path, "path");
        need(data, "data");
        const InstanceMask m = load_instance_mask(path);
        double* buf = static_cast<double*>(std::malloc(sizeof(double) * m.values.size()));
        if (!buf) throw std::bad_alloc();
        std::memcpy(buf, m.values.data(), sizeof(double) * m.values.size());
        *data = buf;
        if (height) *height = m.height;
        if (width) *width = m.width;
    });
}

}  // extern "C"
