// leafarea3d: batch front end over the C API.
#include <cstdio>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "leafarea3d/leafarea3d.h"

using nlohmann::json;

namespace {

struct Failure {
    la3d_status status;
    std::string message;
};

void check(la3d_status s) {
    if (s != LA3D_OK) throw Failure{s, la3d_last_error()};
}

struct StringOwner {
    char* p = nullptr;
    ~StringOwner() { la3d_string_free(p); }
};

struct DepthOwner {
    la3d_depth* p = nullptr;
    ~DepthOwner() { la3d_depth_free(p); }
};

json read_config(const std::string& path) {
    if (path.empty()) return json::object();
    std::ifstream in(path);
    if (!in) throw Failure{LA3D_ERR_IO, "cannot open config " + path};
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::parse_error& e) {
        throw Failure{LA3D_ERR_FORMAT, "config " + path + ": " + e.what()};
    }
    if (!doc.is_object()) throw Failure{LA3D_ERR_FORMAT, "config " + path + ": expected a JSON object"};
    return doc;
}

std::vector<double> split_numbers(const std::string& text, const char* what) {
    std::vector<double> out;
    std::stringstream ss(text);
    for (std::string tok; std::getline(ss, tok, ',');) {
        try {
            std::size_t used = 0;
            out.push_back(std::stod(tok, &used));
            if (used != tok.size()) throw std::invalid_argument(tok);
        } catch (const std::exception&) {
            throw Failure{LA3D_ERR_INVALID_ARGUMENT, std::string("bad ") + what + " '" + text + "'"};
        }
    }
    return out;
}

int default_workers() { return static_cast<int>(std::max(1u, std::thread::hardware_concurrency())); }

struct EstimateArgs {
    std::string dataset, config, out, backend;
    int workers = default_workers();
};

int run_estimate(const EstimateArgs& a) {
    json cfg = read_config(a.config);
    if (!a.backend.empty()) cfg["backend"] = a.backend;
    std::size_t rows = 0, errors = 0;
    check(la3d_run_estimate(a.dataset.c_str(), cfg.dump().c_str(), a.workers, a.out.c_str(), &rows, &errors));
    std::cerr << rows << " rows written to " << a.out << " (" << errors << " with errors)\n";
    return 0;
}

struct EvalArgs {
    std::string pred, gt, out, bins;
    double ioa = 0.9;
    double min_conf = 0.5;
};

int run_eval(const EvalArgs& a) {
    StringOwner report;
    check(la3d_run_eval(a.pred.c_str(), a.gt.c_str(), a.ioa, a.min_conf, a.out.empty() ? nullptr : a.out.c_str(),
                        a.bins.empty() ? nullptr : a.bins.c_str(), &report.p));
    if (a.out.empty()) std::cout << report.p;
    return 0;
}

struct SynthArgs {
    std::string config, out, distances, noise;
    std::optional<int> n;
    std::optional<std::uint64_t> seed, noise_seed;
    bool planar_only = false;
};

int run_synth(const SynthArgs& a) {
    json cfg = read_config(a.config);
    if (a.n) cfg["count"] = *a.n;
    if (!a.distances.empty()) cfg["distances"] = a.distances;
    if (a.seed) cfg["seed"] = *a.seed;
    if (a.noise_seed) cfg["noise_seed"] = *a.noise_seed;
    if (a.planar_only) cfg["planar_only"] = true;
    if (a.noise == "none") {
        cfg["quant_step"] = 1;
        cfg["sp_prob"] = 0.0;
    } else if (!a.noise.empty() && a.noise != "default") {
        const std::vector<double> v = split_numbers(a.noise, "--noise");
        if (v.size() != 2) throw Failure{LA3D_ERR_INVALID_ARGUMENT, "--noise expects default, none or q,sp"};
        cfg["quant_step"] = static_cast<int>(v[0]);
        cfg["sp_prob"] = v[1];
    }
    StringOwner path;
    check(la3d_run_synth(cfg.dump().c_str(), a.out.c_str(), &path.p));
    std::cout << path.p << "\n";
    return 0;
}

struct FilterArgs {
    std::string in, out, bilateral;
    std::optional<int> median;
};

int run_filter(const FilterArgs& a) {
    DepthOwner cur;
    check(la3d_depth_read_png(a.in.c_str(), &cur.p));
    if (!a.bilateral.empty()) {
        const std::vector<double> v = split_numbers(a.bilateral, "--bilateral");
        if (v.size() != 3) throw Failure{LA3D_ERR_INVALID_ARGUMENT, "--bilateral expects d,sigma_color,sigma_space"};
        DepthOwner next;
        check(la3d_bilateral_filter(cur.p, static_cast<int>(v[0]), v[1], v[2], &next.p));
        std::swap(cur.p, next.p);
    }
    if (a.median) {
        DepthOwner next;
        check(la3d_median_filter(cur.p, *a.median, &next.p));
        std::swap(cur.p, next.p);
    }
    check(la3d_depth_write_png(cur.p, a.out.c_str()));
    return 0;
}

struct CrossvalArgs {
    std::string dataset, config, backend, out, rows;
    int k = 5;
    std::uint64_t seed = 42;
    int workers = default_workers();
};

int run_crossval(const CrossvalArgs& a) {
    json cfg = read_config(a.config);
    if (!a.backend.empty()) cfg["backend"] = a.backend;
    StringOwner summary;
    check(la3d_run_crossval(a.dataset.c_str(), a.k, a.seed, cfg.dump().c_str(), a.workers,
                            a.out.empty() ? nullptr : a.out.c_str(), a.rows.empty() ? nullptr : a.rows.c_str(),
                            &summary.p));
    if (a.out.empty()) std::cout << summary.p;
    return 0;
}

struct AreaHeadArgs {
    std::string weights, features, shape, mask, map_out;
    std::optional<double> gt;
    bool grad_check = false;
};

int run_areahead(const AreaHeadArgs& a) {
    la3d_area_head* raw = nullptr;
    check(la3d_area_head_load(a.weights.c_str(), &raw));
    std::unique_ptr<la3d_area_head, void (*)(la3d_area_head*)> head(raw, la3d_area_head_free);

    double* feat_raw = nullptr;
    int c = 0, h = 0, w = 0;
    check(la3d_load_features(a.features.c_str(), a.shape.empty() ? nullptr : a.shape.c_str(), &feat_raw, &c, &h, &w));
    std::unique_ptr<double, void (*)(void*)> feat(feat_raw, la3d_buffer_free);

    std::vector<double> ones;
    std::unique_ptr<double, void (*)(void*)> mask(nullptr, la3d_buffer_free);
    const double* mask_data = nullptr;
    if (!a.mask.empty()) {
        double* m = nullptr;
        int mh = 0, mw = 0;
        check(la3d_load_mask(a.mask.c_str(), &m, &mh, &mw));
        mask.reset(m);
        if (mh != h || mw != w)
            throw Failure{LA3D_ERR_INVALID_ARGUMENT, "mask is " + std::to_string(mw) + "x" + std::to_string(mh) +
                                                         ", features are " + std::to_string(w) + "x" + std::to_string(h)};
        mask_data = m;
    } else {
        ones.assign(static_cast<std::size_t>(h) * w, 1.0);
        mask_data = ones.data();
    }

    std::vector<double> map(static_cast<std::size_t>(h) * w);
    double area = 0;
    check(la3d_area_head_forward(head.get(), feat.get(), c, h, w, mask_data, &area, map.data()));
    json out = {{"area_cm2", area}};
    if (a.gt) {
        double loss = 0;
        check(la3d_area_head_loss(head.get(), area, *a.gt, &loss));
        out["loss"] = loss;
        if (a.grad_check) {
            double rel = 0;
            std::size_t checked = 0, excluded = 0;
            check(la3d_area_head_grad_check(head.get(), feat.get(), c, h, w, mask_data, *a.gt, 1e-4, &rel,
                                            &checked, &excluded));
            out["grad_check"] = {{"max_rel_error", rel}, {"checked", checked}, {"excluded", excluded}};
        }
    } else if (a.grad_check) {
        throw Failure{LA3D_ERR_INVALID_ARGUMENT, "--grad-check needs --gt"};
    }
    if (!a.map_out.empty()) {
        std::ofstream f(a.map_out);
        if (!f) throw Failure{LA3D_ERR_IO, "cannot write " + a.map_out};
        f.precision(17);
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) f << map[static_cast<std::size_t>(y) * w + x] << (x + 1 < w ? ',' : '\n');
    }
    std::cout << out.dump(2) << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Leaf area estimation from RGBD frames"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string(la3d_version()));

    EstimateArgs est;
    auto* c_est = app.add_subcommand("estimate", "Estimate the area of every annotated leaf");
    c_est->add_option("--dataset", est.dataset, "Annotation JSON")->required()->check(CLI::ExistingFile);
    c_est->add_option("--backend", est.backend, "poisson or heightfield")
        ->check(CLI::IsMember({"poisson", "heightfield"}));
    c_est->add_option("--config", est.config, "Flat JSON config; flags override it")->check(CLI::ExistingFile);
    c_est->add_option("--workers", est.workers, "Worker threads")->check(CLI::PositiveNumber);
    c_est->add_option("--out", est.out, "Results CSV")->required();

    EvalArgs ev;
    auto* c_eval = app.add_subcommand("eval", "Score predictions against ground truth");
    c_eval->add_option("--pred", ev.pred, "Results CSV or prediction JSON")->required()->check(CLI::ExistingFile);
    c_eval->add_option("--gt", ev.gt, "Ground-truth annotation JSON")->required()->check(CLI::ExistingFile);
    c_eval->add_option("--ioa", ev.ioa, "IoA match threshold")->check(CLI::Range(0.0, 1.0));
    c_eval->add_option("--min-confidence", ev.min_conf, "Ignore predictions below this confidence")
        ->check(CLI::Range(0.0, 1.0));
    c_eval->add_option("--out", ev.out, "Report JSON (stdout if omitted)");
    c_eval->add_option("--bins", ev.bins, "Distance-bin CSV");

    SynthArgs sy;
    auto* c_synth = app.add_subcommand("synth", "Generate a synthetic leaf dataset");
    c_synth->add_option("--config", sy.config, "Flat JSON synth config")->check(CLI::ExistingFile);
    c_synth->add_option("--n", sy.n, "Number of leaves");
    c_synth->add_option("--distances", sy.distances, "lo:hi:step or a comma list, meters");
    c_synth->add_option("--noise", sy.noise, "default, none or quant_step,sp_prob");
    c_synth->add_option("--seed", sy.seed, "Leaf layout seed");
    c_synth->add_option("--noise-seed", sy.noise_seed, "Depth noise seed");
    c_synth->add_flag("--planar-only", sy.planar_only, "Ellipses only");
    c_synth->add_option("--out", sy.out, "Output directory")->required();

    FilterArgs fi;
    auto* c_filter = app.add_subcommand("filter", "Filter a 16-bit depth PNG");
    c_filter->add_option("--in", fi.in, "Input depth PNG")->required()->check(CLI::ExistingFile);
    c_filter->add_option("--out", fi.out, "Output depth PNG")->required();
    c_filter->add_option("--bilateral", fi.bilateral, "d,sigma_color,sigma_space");
    c_filter->add_option("--median", fi.median, "Median kernel size");

    CrossvalArgs cv;
    auto* c_cv = app.add_subcommand("crossval", "K-fold evaluation over images");
    c_cv->add_option("--dataset", cv.dataset, "Annotation JSON")->required()->check(CLI::ExistingFile);
    c_cv->add_option("--k", cv.k, "Folds")->check(CLI::PositiveNumber);
    c_cv->add_option("--seed", cv.seed, "Shuffle seed");
    c_cv->add_option("--backend", cv.backend)->check(CLI::IsMember({"poisson", "heightfield"}));
    c_cv->add_option("--config", cv.config)->check(CLI::ExistingFile);
    c_cv->add_option("--workers", cv.workers)->check(CLI::PositiveNumber);
    c_cv->add_option("--out", cv.out, "Summary JSON (stdout if omitted)");
    c_cv->add_option("--rows", cv.rows, "Per-instance results CSV");

    AreaHeadArgs ah;
    auto* c_ah = app.add_subcommand("areahead", "Run the area head on a feature map");
    c_ah->add_option("--weights", ah.weights, "Weight JSON")->required()->check(CLI::ExistingFile);
    c_ah->add_option("--features", ah.features, ".npy or raw float32")->required()->check(CLI::ExistingFile);
    c_ah->add_option("--shape", ah.shape, "C,H,W for raw features");
    c_ah->add_option("--mask", ah.mask, "Mask PNG or .npy (all ones if omitted)");
    c_ah->add_option("--gt", ah.gt, "Ground-truth area, cm^2");
    c_ah->add_flag("--grad-check", ah.grad_check, "Compare analytic and numeric gradients");
    c_ah->add_option("--map-out", ah.map_out, "Per-pixel map as CSV");

    CLI11_PARSE(app, argc, argv);

    try {
        if (c_est->parsed()) return run_estimate(est);
        if (c_eval->parsed()) return run_eval(ev);
        if (c_synth->parsed()) return run_synth(sy);
        if (c_filter->parsed()) return run_filter(fi);
        if (c_cv->parsed()) return run_crossval(cv);
        if (c_ah->parsed()) return run_areahead(ah);
    } catch (const Failure& f) {
        std::cerr << "leafarea3d: " << la3d_status_name(f.status) << ": " << f.message << "\n";
        return 1;
    }
    return 1;
}
