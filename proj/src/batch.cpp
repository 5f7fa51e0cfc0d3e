#include "leafarea/batch.hpp"

#include <atomic>
#include <fstream>
#include <map>
#include <set>
#include <thread>

#include "json.hpp"
#include "report_json.hpp"

namespace leafarea {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

json parse_object(const std::string& text, const char* what) {
    json doc;
    try {
        doc = text.empty() ? json::object() : json::parse(text);
    } catch (const json::parse_error& e) {
        fail(ErrorKind::Format, std::string(what) + ": " + e.what());
    }
    if (!doc.is_object()) fail(ErrorKind::Format, std::string(what) + ": expected a JSON object");
    return doc;
}

// Reads the keys of a flat config object, rejecting anything unexpected.
class FlatReader {
public:
    FlatReader(const json& doc, const char* what) : doc_(doc), what_(what) {}

    template <typename T>
    void get(const char* key, T& out) {
        seen_.insert(key);
        auto it = doc_.find(key);
        if (it == doc_.end() || it->is_null()) return;
        try {
            out = it->get<T>();
        } catch (const json::exception&) {
            fail(ErrorKind::Format, what_ + ": '" + key + "' has the wrong type");
        }
    }

    void mark(const char* key) { seen_.insert(key); }

    void finish() const {
        for (auto it = doc_.begin(); it != doc_.end(); ++it)
            if (!seen_.count(it.key())) fail(ErrorKind::Format, what_ + ": unknown key '" + it.key() + "'");
    }

private:
    const json& doc_;
    std::string what_;
    std::set<std::string> seen_;
};

}  // namespace

PipelineConfig pipeline_config_from_json(const std::string& text, const PipelineConfig& base) {
    const json doc = parse_object(text, "config");
    PipelineConfig c = base;
    FlatReader r(doc, "config");
    std::string backend = backend_name(c.meshing.backend);
    r.get("backend", backend);
    c.meshing.backend = parse_backend(backend);
    r.get("bilateral_d", c.bilateral.diameter);
    r.get("bilateral_sigma_color", c.bilateral.sigma_color);
    r.get("bilateral_sigma_space", c.bilateral.sigma_space);
    r.get("median_kernel", c.median_kernel);
    r.get("dbscan_eps", c.dbscan.eps);
    r.get("dbscan_min_pts", c.dbscan.min_pts);
    r.get("normal_neighbors", c.normal_neighbors);
    r.get("octree_depth", c.meshing.octree_depth);
    r.get("target_triangles", c.meshing.target_triangles);
    r.get("laplacian_iterations", c.meshing.laplacian_iterations);
    r.get("screening_weight", c.meshing.screening_weight);
    r.get("samples_per_node", c.meshing.samples_per_node);
    r.get("cg_tolerance", c.meshing.cg_tolerance);
    r.get("cg_max_iterations", c.meshing.cg_max_iterations);
    r.finish();
    c.validate();
    return c;
}

std::string pipeline_config_to_json(const PipelineConfig& c) {
    json doc = {{"backend", backend_name(c.meshing.backend)},
                {"bilateral_d", c.bilateral.diameter},
                {"bilateral_sigma_color", c.bilateral.sigma_color},
                {"bilateral_sigma_space", c.bilateral.sigma_space},
                {"median_kernel", c.median_kernel},
                {"dbscan_eps", c.dbscan.eps},
                {"dbscan_min_pts", c.dbscan.min_pts},
                {"normal_neighbors", c.normal_neighbors},
                {"octree_depth", c.meshing.octree_depth},
                {"target_triangles", c.meshing.target_triangles},
                {"laplacian_iterations", c.meshing.laplacian_iterations},
                {"screening_weight", c.meshing.screening_weight},
                {"samples_per_node", c.meshing.samples_per_node},
                {"cg_tolerance", c.meshing.cg_tolerance},
                {"cg_max_iterations", c.meshing.cg_max_iterations}};
    return doc.dump(2);
}

SynthConfig synth_config_from_json(const std::string& text, const SynthConfig& base) {
    const json doc = parse_object(text, "synth config");
    SynthConfig c = base;
    FlatReader r(doc, "synth config");
    r.get("count", c.count);
    if (auto it = doc.find("distances"); it != doc.end()) {
        if (it->is_string())
            c.distances = parse_distances(it->get<std::string>());
        else if (it->is_array())
            c.distances = it->get<std::vector<double>>();
        else
            fail(ErrorKind::Format, "synth config: 'distances' must be a string or array");
    }
    r.mark("distances");
    r.get("min_area_cm2", c.min_area_cm2);
    r.get("max_area_cm2", c.max_area_cm2);
    r.get("max_tilt_deg", c.max_tilt_deg);
    r.get("planar_only", c.planar_only);
    r.get("quant_step", c.noise.quant_step);
    r.get("sp_prob", c.noise.sp_prob);
    r.get("noise_seed", c.noise.seed);
    r.get("seed", c.seed);
    r.finish();
    c.validate();
    return c;
}

std::vector<ResultRow> estimate_dataset(const Dataset& dataset, const PipelineConfig& config,
                                        int workers) {
    require(workers >= 1, "worker count must be >= 1");
    config.validate();

    // work is handed out per image so each frame is decoded once
    std::map<std::int64_t, std::vector<std::size_t>> by_image;
    for (std::size_t i = 0; i < dataset.instances.size(); ++i)
        by_image[dataset.instances[i].image_id].push_back(i);
    std::vector<const std::vector<std::size_t>*> jobs;
    for (const auto& [id, members] : by_image) jobs.push_back(&members);

    std::vector<ResultRow> rows(dataset.instances.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t j; (j = next.fetch_add(1)) < jobs.size();) {
            const auto& members = *jobs[j];
            const std::int64_t image_id = dataset.instances[members.front()].image_id;
            std::optional<RgbdFrame> frame;
            std::string load_error;
            try {
                frame = dataset.load_frame(image_id);
            } catch (const std::exception& e) {
                load_error = std::string("load: ") + e.what();
            }
            for (std::size_t idx : members) {
                const AnnotatedInstance& inst = dataset.instances[idx];
                ResultRow& row = rows[idx];
                row.image_id = inst.image_id;
                row.instance_id = inst.instance_id;
                row.gt_area_cm2 = inst.gt_area_cm2;
                if (!frame) {
                    row.error = load_error;
                    continue;
                }
                try {
                    row.distance_m = median_mask_distance(*frame, inst.bitmask);
                    row.pred_area_cm2 = estimate_leaf_area_ip(*frame, inst.bitmask, config).area_cm2;
                } catch (const std::exception& e) {
                    row.error = e.what();
                }
            }
        }
    };
    const int n = std::min<int>(workers, static_cast<int>(std::max<std::size_t>(jobs.size(), 1)));
    std::vector<std::thread> pool;
    for (int t = 1; t < n; ++t) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();
    return rows;
}

EvalReport evaluate_results(const std::vector<ResultRow>& rows, const Dataset& ground_truth,
                            double ioa_threshold, double min_confidence) {
    std::map<std::int64_t, const AnnotatedInstance*> gts;
    for (const AnnotatedInstance& inst : ground_truth.instances) gts[inst.instance_id] = &inst;
    std::set<std::int64_t> taken;
    std::vector<MatchedRecord> matched;
    std::size_t n_pred = 0;
    for (const ResultRow& r : rows) {
        if (!r.pred_area_cm2 || r.confidence < min_confidence) continue;
        ++n_pred;
        auto it = gts.find(r.instance_id);
        if (it == gts.end() || it->second->image_id != r.image_id) continue;
        if (r.ioa < ioa_threshold || taken.count(r.instance_id)) continue;
        taken.insert(r.instance_id);
        matched.push_back({r.ioa, r.confidence, r.pred_area_cm2, it->second->gt_area_cm2, r.distance_m});
    }
    return build_report(matched, n_pred, ground_truth.instances.size());
}

EvalReport evaluate_prediction_file(const fs::path& path, const Dataset& ground_truth,
                                    double ioa_threshold, double min_confidence) {
    std::ifstream in(path);
    if (!in) fail(ErrorKind::Io, "cannot open predictions " + path.string());
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::parse_error& e) {
        fail(ErrorKind::Format, std::string("predictions: ") + e.what());
    }

    std::map<std::int64_t, ImageEval> images;
    for (const AnnotatedInstance& inst : ground_truth.instances)
        images[inst.image_id].gts.push_back({inst.bitmask, inst.gt_area_cm2, std::nullopt});
    try {
        for (const json& p : doc.at("predictions")) {
            const std::int64_t image_id = p.at("image_id").get<std::int64_t>();
            const FrameDescriptor& fd = ground_truth.frame(image_id);
            std::vector<Polygon> polys;
            for (const json& flat : p.at("segmentation")) {
                Polygon poly;
                for (std::size_t i = 0; i + 1 < flat.size(); i += 2)
                    poly.emplace_back(flat[i].get<double>(), flat[i + 1].get<double>());
                polys.push_back(std::move(poly));
            }
            ScoredPrediction sp;
            sp.bitmask = rasterize_polygons(polys, fd.intrinsics.width, fd.intrinsics.height);
            sp.confidence = p.value("confidence", 1.0);
            if (p.contains("pred_area_cm2") && !p["pred_area_cm2"].is_null())
                sp.area_cm2 = p["pred_area_cm2"].get<double>();
            if (p.contains("distance_m") && !p["distance_m"].is_null())
                sp.distance_m = p["distance_m"].get<double>();
            images[image_id].preds.push_back(std::move(sp));
        }
    } catch (const json::exception& e) {
        fail(ErrorKind::Format, std::string("predictions: ") + e.what());
    }

    std::vector<ImageEval> list;
    for (auto& [id, img] : images) {
        bool needs_depth = false;
        for (const ScoredPrediction& p : img.preds) needs_depth |= !p.distance_m;
        if (needs_depth && !img.gts.empty()) {
            const RgbdFrame frame = ground_truth.load_frame(id);
            for (GroundTruth& g : img.gts) g.distance_m = median_mask_distance(frame, g.bitmask);
        }
        list.push_back(std::move(img));
    }
    return evaluate_images(list, ioa_threshold, min_confidence);
}

CrossvalResult run_crossval(const Dataset& dataset, int k, std::uint64_t seed,
                            const PipelineConfig& config, int workers, double ioa_threshold,
                            double min_confidence) {
    CrossvalResult res;
    res.k = k;
    res.seed = seed;
    const std::vector<Fold> folds = kfold_split(dataset, k, seed);
    res.rows = estimate_dataset(dataset, config, workers);
    for (const Fold& f : folds) {
        std::vector<std::int64_t> ids;
        for (const auto& [id, fd] : f.val.frames) ids.push_back(id);
        const std::set<std::int64_t> val(ids.begin(), ids.end());
        std::vector<ResultRow> rows;
        for (const ResultRow& r : res.rows)
            if (val.count(r.image_id)) rows.push_back(r);
        res.fold_images.push_back(ids);
        res.folds.push_back(evaluate_results(rows, f.val, ioa_threshold, min_confidence));
    }
    res.aggregate = aggregate_folds(res.folds);
    return res;
}

std::string crossval_to_json(const CrossvalResult& r) {
    json folds = json::array();
    for (std::size_t f = 0; f < r.folds.size(); ++f)
        folds.push_back({{"fold", f}, {"images", r.fold_images[f]}, {"report", report_json(r.folds[f])}});
    std::size_t errors = 0;
    for (const ResultRow& row : r.rows) errors += !row.error.empty();
    json doc = {{"k", r.k},
                {"seed", r.seed},
                {"instances", r.rows.size()},
                {"instance_errors", errors},
                {"folds", std::move(folds)},
                {"aggregate", {{"mean", report_json(r.aggregate.mean)}, {"std", report_json(r.aggregate.std)}}}};
    return doc.dump(2);
}

}  // namespace leafarea
