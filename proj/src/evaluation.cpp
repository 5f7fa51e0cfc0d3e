#include "leafarea/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <sstream>

#include "leafarea/dataset_io.hpp"
#include "report_json.hpp"

namespace leafarea {

using nlohmann::json;

double intersection_over_area(const Mask& pred, const Mask& gt) {
    require(pred.same_shape(gt), "intersection_over_area: mask dimensions differ");
    std::size_t inter = 0, area = 0;
    for (std::size_t i = 0; i < gt.size(); ++i) {
        if (!gt.data()[i]) continue;
        ++area;
        inter += pred.data()[i] != 0;
    }
    if (area == 0) fail(ErrorKind::InvalidArgument, "intersection_over_area: empty ground-truth mask");
    return static_cast<double>(inter) / static_cast<double>(area);
}

MatchResult match_instances(const std::vector<Mask>& preds, const std::vector<Mask>& gts,
                            double ioa_threshold) {
    std::vector<MatchPair> candidates;
    for (int p = 0; p < static_cast<int>(preds.size()); ++p)
        for (int g = 0; g < static_cast<int>(gts.size()); ++g) {
            const double ioa = intersection_over_area(preds[p], gts[g]);
            if (ioa >= ioa_threshold) candidates.push_back({p, g, ioa});
        }
    std::stable_sort(candidates.begin(), candidates.end(),
                     [](const MatchPair& a, const MatchPair& b) { return a.ioa > b.ioa; });

    MatchResult res;
    std::vector<char> pred_used(preds.size(), 0), gt_used(gts.size(), 0);
    for (const MatchPair& c : candidates) {
        if (pred_used[c.pred] || gt_used[c.gt]) continue;
        pred_used[c.pred] = gt_used[c.gt] = 1;
        res.pairs.push_back(c);
    }
    for (int p = 0; p < static_cast<int>(preds.size()); ++p)
        if (!pred_used[p]) res.unmatched_preds.push_back(p);
    for (int g = 0; g < static_cast<int>(gts.size()); ++g)
        if (!gt_used[g]) res.unmatched_gts.push_back(g);
    return res;
}

double ape_percent(double pred, double gt) {
    require(gt > 0, "APE needs a positive ground truth");
    return 100.0 * std::abs(pred - gt) / gt;
}

namespace {

double mean_of(const std::vector<double>& v) {
    return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double pop_std(const std::vector<double>& v) {
    const double m = mean_of(v);
    double ss = 0;
    for (double x : v) ss += (x - m) * (x - m);
    return std::sqrt(ss / static_cast<double>(v.size()));
}

double median_of(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace

RegressionMetrics regression_metrics(const std::vector<double>& pred, const std::vector<double>& gt) {
    require(!pred.empty() && pred.size() == gt.size(),
            "regression_metrics: need equal-length, non-empty inputs");
    std::vector<double> apes;
    for (std::size_t i = 0; i < gt.size(); ++i) apes.push_back(ape_percent(pred[i], gt[i]));
    const double gm = mean_of(gt);
    double ss_res = 0, ss_tot = 0;
    for (std::size_t i = 0; i < gt.size(); ++i) {
        ss_res += (pred[i] - gt[i]) * (pred[i] - gt[i]);
        ss_tot += (gt[i] - gm) * (gt[i] - gm);
    }
    if (ss_tot == 0) fail(ErrorKind::Degenerate, "regression_metrics: r2 undefined (all ground truths equal)");
    return {1.0 - ss_res / ss_tot, mean_of(apes), pop_std(apes), median_of(apes)};
}

std::vector<DistanceBin> distance_binned_errors(const std::vector<DistanceRecord>& records,
                                                double bin_width_m, double lo, double hi) {
    require(bin_width_m > 0 && hi > lo, "distance bins: need width > 0 and hi > lo");
    const int nbins = std::max(1, static_cast<int>(std::ceil((hi - lo) / bin_width_m - 1e-9)));
    std::vector<DistanceBin> bins(nbins);
    std::vector<std::vector<double>> values(nbins);
    for (int b = 0; b < nbins; ++b) {
        bins[b].lo = lo + b * bin_width_m;
        bins[b].hi = std::min(hi, lo + (b + 1) * bin_width_m);
    }
    for (const DistanceRecord& r : records) {
        int b;
        bool clamped = false;
        if (r.distance_m < lo) {
            b = 0;
            clamped = true;
        } else if (r.distance_m > hi) {
            b = nbins - 1;
            clamped = true;
        } else {
            b = std::min(nbins - 1, static_cast<int>(std::floor((r.distance_m - lo) / bin_width_m)));
        }
        values[b].push_back(r.ape);
        bins[b].out_of_range += clamped;
    }
    for (int b = 0; b < nbins; ++b) {
        bins[b].count = values[b].size();
        if (values[b].empty()) continue;
        bins[b].mean_ape = mean_of(values[b]);
        bins[b].median_ape = median_of(values[b]);
        bins[b].std_ape = pop_std(values[b]);
    }
    return bins;
}

double f1_score(double precision, double recall) {
    return precision + recall > 0 ? 2.0 * precision * recall / (precision + recall) : 0.0;
}

EvalReport build_report(const std::vector<MatchedRecord>& matched, std::size_t n_predictions,
                        std::size_t n_ground_truth) {
    EvalReport rep;
    rep.n_predictions = n_predictions;
    rep.n_ground_truth = n_ground_truth;
    rep.n_matched = matched.size();
    rep.precision = n_predictions ? static_cast<double>(matched.size()) / n_predictions : 0.0;
    rep.recall = n_ground_truth ? static_cast<double>(matched.size()) / n_ground_truth : 0.0;
    rep.f1 = f1_score(rep.precision, rep.recall);

    std::vector<double> pred, gt;
    std::vector<DistanceRecord> dist;
    double ioa_sum = 0, conf_sum = 0;
    for (const MatchedRecord& m : matched) {
        ioa_sum += m.ioa;
        conf_sum += m.confidence;
        if (!m.pred_area_cm2 || !(m.gt_area_cm2 > 0)) continue;
        pred.push_back(*m.pred_area_cm2);
        gt.push_back(m.gt_area_cm2);
        if (m.distance_m) dist.push_back({*m.distance_m, ape_percent(*m.pred_area_cm2, m.gt_area_cm2)});
    }
    if (!matched.empty()) {
        rep.avg_ioa = ioa_sum / matched.size();
        rep.avg_confidence = conf_sum / matched.size();
    }
    rep.n_regression = pred.size();
    if (!pred.empty()) {
        std::vector<double> apes;
        for (std::size_t i = 0; i < pred.size(); ++i) apes.push_back(ape_percent(pred[i], gt[i]));
        rep.ape_mean = mean_of(apes);
        rep.ape_std = pop_std(apes);
        rep.ape_median = median_of(apes);
        try {
            rep.r2 = regression_metrics(pred, gt).r2;
        } catch (const Error& e) {
            rep.note = e.what();
        }
    } else {
        rep.note = "no matched instance with both predicted and known ground-truth area";
    }
    rep.distance_bins = distance_binned_errors(dist);
    return rep;
}

EvalReport evaluate_images(const std::vector<ImageEval>& images, double ioa_threshold,
                           double min_confidence) {
    std::vector<MatchedRecord> matched;
    std::size_t n_pred = 0, n_gt = 0;
    for (const ImageEval& img : images) {
        std::vector<Mask> pm, gm;
        std::vector<const ScoredPrediction*> kept;
        for (const ScoredPrediction& p : img.preds)
            if (p.confidence >= min_confidence) {
                kept.push_back(&p);
                pm.push_back(p.bitmask);
            }
        for (const GroundTruth& g : img.gts) gm.push_back(g.bitmask);
        n_pred += kept.size();
        n_gt += gm.size();
        for (const MatchPair& pair : match_instances(pm, gm, ioa_threshold).pairs) {
            const ScoredPrediction& p = *kept[pair.pred];
            const GroundTruth& g = img.gts[pair.gt];
            matched.push_back({pair.ioa, p.confidence, p.area_cm2, g.area_cm2,
                               p.distance_m ? p.distance_m : g.distance_m});
        }
    }
    return build_report(matched, n_pred, n_gt);
}

FoldAggregate aggregate_folds(const std::vector<EvalReport>& reports) {
    require(reports.size() >= 2, "aggregate_folds: need at least two reports");
    FoldAggregate agg;
    auto field = [&](auto get, auto set) {
        std::vector<double> v;
        for (const EvalReport& r : reports) v.push_back(static_cast<double>(get(r)));
        set(agg.mean, mean_of(v));
        set(agg.std, pop_std(v));
    };
#define LEAFAREA_FIELD(name)                                   \
    field([](const EvalReport& r) { return r.name; },          \
          [](EvalReport& r, double x) { r.name = static_cast<decltype(r.name)>(x); })
    LEAFAREA_FIELD(f1);
    LEAFAREA_FIELD(precision);
    LEAFAREA_FIELD(recall);
    LEAFAREA_FIELD(avg_ioa);
    LEAFAREA_FIELD(avg_confidence);
    LEAFAREA_FIELD(ape_mean);
    LEAFAREA_FIELD(ape_std);
    LEAFAREA_FIELD(ape_median);
#undef LEAFAREA_FIELD
    // counts are summed, not averaged
    for (const EvalReport& r : reports) {
        agg.mean.n_predictions += r.n_predictions;
        agg.mean.n_ground_truth += r.n_ground_truth;
        agg.mean.n_matched += r.n_matched;
        agg.mean.n_regression += r.n_regression;
    }

    std::vector<double> r2s;
    for (const EvalReport& r : reports)
        if (r.r2) r2s.push_back(*r.r2);
    if (!r2s.empty()) {
        agg.mean.r2 = mean_of(r2s);
        agg.std.r2 = pop_std(r2s);
        if (r2s.size() < reports.size())
            agg.mean.note = "r2 averaged over " + std::to_string(r2s.size()) + " of " +
                            std::to_string(reports.size()) + " folds";
    }

    const std::size_t nbins = reports.front().distance_bins.size();
    for (std::size_t b = 0; b < nbins; ++b) {
        DistanceBin mean_bin = reports.front().distance_bins[b], std_bin = mean_bin;
        std::vector<double> counts, apes;
        for (const EvalReport& r : reports) {
            counts.push_back(static_cast<double>(r.distance_bins[b].count));
            if (r.distance_bins[b].mean_ape) apes.push_back(*r.distance_bins[b].mean_ape);
        }
        mean_bin.count = static_cast<std::size_t>(std::lround(mean_of(counts)));
        std_bin.count = static_cast<std::size_t>(std::lround(pop_std(counts)));
        mean_bin.median_ape.reset();
        mean_bin.std_ape.reset();
        std_bin.median_ape.reset();
        std_bin.std_ape.reset();
        mean_bin.mean_ape.reset();
        std_bin.mean_ape.reset();
        if (!apes.empty()) {
            mean_bin.mean_ape = mean_of(apes);
            std_bin.mean_ape = pop_std(apes);
        }
        agg.mean.distance_bins.push_back(mean_bin);
        agg.std.distance_bins.push_back(std_bin);
    }
    return agg;
}

namespace {

json optional_number(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

}  // namespace

json report_json(const EvalReport& r) {
    json bins = json::array();
    for (const DistanceBin& b : r.distance_bins)
        bins.push_back({{"lo_m", b.lo},
                        {"hi_m", b.hi},
                        {"count", b.count},
                        {"mean_ape", optional_number(b.mean_ape)},
                        {"median_ape", optional_number(b.median_ape)},
                        {"std_ape", optional_number(b.std_ape)},
                        {"out_of_range", b.out_of_range}});
    json j = {{"n_predictions", r.n_predictions},
              {"n_ground_truth", r.n_ground_truth},
              {"n_matched", r.n_matched},
              {"n_regression", r.n_regression},
              {"f1", r.f1},
              {"precision", r.precision},
              {"recall", r.recall},
              {"avg_ioa", r.avg_ioa},
              {"avg_confidence", r.avg_confidence},
              {"r2", optional_number(r.r2)},
              {"ape_mean", r.ape_mean},
              {"ape_std", r.ape_std},
              {"ape_median", r.ape_median},
              {"distance_bins", std::move(bins)}};
    if (!r.note.empty()) j["note"] = r.note;
    return j;
}

std::string report_to_json(const EvalReport& report, int indent) {
    return report_json(report).dump(indent);
}

std::string bins_to_csv(const std::vector<DistanceBin>& bins) {
    std::ostringstream out;
    out << "bin_lo_m,bin_hi_m,count,mean_ape,median_ape,std_ape,out_of_range\n";
    auto opt = [](const std::optional<double>& v) { return v ? format_real(*v) : std::string(); };
    for (const DistanceBin& b : bins)
        out << format_real(b.lo) << ',' << format_real(b.hi) << ',' << b.count << ','
            << opt(b.mean_ape) << ',' << opt(b.median_ape) << ',' << opt(b.std_ape) << ','
            << b.out_of_range << '\n';
    return out.str();
}

}  // namespace leafarea
