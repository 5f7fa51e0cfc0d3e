#include "doctest.h"

#include <algorithm>
#include <map>
#include <random>
#include <set>

#include "json.hpp"
#include "leafarea/batch.hpp"
#include "leafarea/evaluation.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace leafarea;

namespace {

Mask box(int x0, int y0, int w, int h, int W = 20, int H = 20) {
    Mask m(W, H, 0);
    for (int y = y0; y < y0 + h; ++y)
        for (int x = x0; x < x0 + w; ++x) m(x, y) = 1;
    return m;
}

EvalReport report_with_f1(double f1) {
    EvalReport r;
    r.f1 = f1;
    r.precision = f1;
    r.recall = 1;
    r.r2 = 0.5;
    return r;
}

}  // namespace

TEST_CASE("intersection over area") {
    const Mask gt = box(2, 2, 6, 4);
    CHECK(intersection_over_area(gt, gt) == 1.0);
    CHECK(intersection_over_area(box(10, 10, 3, 3), gt) == 0.0);
    CHECK(intersection_over_area(box(2, 2, 3, 4), gt) == 0.5);
    // normalized by the gt side only
    const Mask big = box(0, 0, 12, 12);
    CHECK(intersection_over_area(big, gt) == 1.0);
    CHECK(intersection_over_area(gt, big) == doctest::Approx(24.0 / 144.0));
    CHECK_THROWS_AS(intersection_over_area(gt, Mask(20, 20, 0)), Error);
    CHECK_THROWS_AS(intersection_over_area(gt, Mask(10, 20, 1)), Error);
}

TEST_CASE("matching") {
    const Mask a = box(0, 0, 5, 5), b = box(10, 10, 5, 5);
    SUBCASE("two perfect predictions") {
        const MatchResult r = match_instances({a, b}, {a, b});
        CHECK(r.pairs.size() == 2);
        CHECK(r.unmatched_preds.empty());
        CHECK(r.unmatched_gts.empty());
    }
    SUBCASE("one of two ground truths found") {
        const MatchResult r = match_instances({a}, {a, b});
        CHECK(r.pairs.size() == 1);
        CHECK(r.unmatched_gts == std::vector<int>{1});
        const double precision = 1.0, recall = 0.5;
        CHECK(f1_score(precision, recall) == doctest::Approx(2.0 / 3.0));
    }
    SUBCASE("greedy by descending IoA, never below the threshold") {
        const Mask gt = box(0, 0, 10, 10);
        const Mask p95 = box(0, 0, 10, 10);
        Mask p92 = box(0, 0, 10, 10);
        for (int i = 0; i < 8; ++i) p92(9, i) = 0;
        const MatchResult r = match_instances({p92, p95}, {gt});
        REQUIRE(r.pairs.size() == 1);
        CHECK(r.pairs[0].pred == 1);
        CHECK(r.unmatched_preds == std::vector<int>{0});
        CHECK(match_instances({box(0, 0, 10, 8)}, {gt}, 0.9).pairs.empty());
        CHECK(kDefaultIoaThreshold == 0.9);
    }
}

TEST_CASE("matching properties on random masks") {
    std::mt19937 rng(31);
    std::uniform_int_distribution<int> pos(0, 14), size(2, 6);
    for (int t = 0; t < 50; ++t) {
        std::vector<Mask> preds, gts;
        for (int i = 0; i < 5; ++i) gts.push_back(box(pos(rng), pos(rng), size(rng), size(rng)));
        for (int i = 0; i < 6; ++i) preds.push_back(box(pos(rng), pos(rng), size(rng), size(rng)));
        preds.push_back(gts[t % 5]);
        const double thr = 0.3 + 0.1 * (t % 7);
        const MatchResult r = match_instances(preds, gts, thr);
        CHECK(r.pairs.size() <= std::min(preds.size(), gts.size()));
        std::set<int> ps, gs;
        for (const MatchPair& p : r.pairs) {
            CHECK(p.ioa >= thr);
            CHECK(ps.insert(p.pred).second);
            CHECK(gs.insert(p.gt).second);
        }
        CHECK(r.pairs.size() + r.unmatched_preds.size() == preds.size());
        CHECK(r.pairs.size() + r.unmatched_gts.size() == gts.size());

        // F1 does not depend on the order of the instances
        std::vector<Mask> rp(preds.rbegin(), preds.rend()), rg(gts.rbegin(), gts.rend());
        CHECK(match_instances(rp, rg, thr).pairs.size() == r.pairs.size());
    }
}

TEST_CASE("regression metrics") {
    SUBCASE("perfect predictions") {
        const auto m = regression_metrics({10, 20, 35}, {10, 20, 35});
        CHECK(m.r2 == 1.0);
        CHECK(m.ape_mean == 0.0);
        CHECK(m.ape_std == 0.0);
        CHECK(m.ape_median == 0.0);
    }
    SUBCASE("predicting the mean gives r2 = 0") {
        CHECK(regression_metrics({20, 20, 20}, {10, 20, 30}).r2 == 0.0);
    }
    SUBCASE("single 10 percent miss") {
        // a single gt has SS_tot = 0, so check the APE path on its own
        CHECK(ape_percent(110, 100) == 10.0);
        const auto m = regression_metrics({110, 50}, {100, 50});
        CHECK(m.ape_median == doctest::Approx(5.0));
        CHECK(m.ape_mean == doctest::Approx(5.0));
    }
    SUBCASE("hand-computed sums") {
        // residuals -10, 10, 30: SS_res = 1100; SS_tot = 20000
        const auto m = regression_metrics({90, 210, 330}, {100, 200, 300});
        CHECK(m.r2 == doctest::Approx(1.0 - 1100.0 / 20000.0).epsilon(1e-15));
        CHECK(m.ape_mean == doctest::Approx(25.0 / 3.0));
        CHECK(m.ape_median == doctest::Approx(10.0));
        CHECK(m.ape_std == doctest::Approx(std::sqrt(50.0 / 9.0)));
    }
    SUBCASE("errors") {
        CHECK_THROWS_AS(regression_metrics({1, 2}, {5, 5}), Error);
        CHECK_THROWS_AS(regression_metrics({1}, {1, 2}), Error);
        CHECK_THROWS_AS(regression_metrics({}, {}), Error);
        CHECK_THROWS_AS(regression_metrics({1, 2}, {0, 3}), Error);
    }
}

TEST_CASE("regression metric invariances") {
    std::mt19937 rng(8);
    std::uniform_real_distribution<double> u(10, 200), noise(0.8, 1.2);
    std::vector<double> gt, pred;
    for (int i = 0; i < 25; ++i) {
        gt.push_back(u(rng));
        pred.push_back(gt.back() * noise(rng));
    }
    const auto base = regression_metrics(pred, gt);
    for (double s : {0.01, 3.0, 1e4}) {
        std::vector<double> sg = gt, sp = pred;
        for (auto& v : sg) v *= s;
        for (auto& v : sp) v *= s;
        const auto m = regression_metrics(sp, sg);
        CHECK(m.r2 == doctest::Approx(base.r2).epsilon(1e-12));
        CHECK(m.ape_mean == doctest::Approx(base.ape_mean).epsilon(1e-12));
        CHECK(m.ape_median == doctest::Approx(base.ape_median).epsilon(1e-12));
    }
    CHECK(base.r2 <= 1.0);
}

TEST_CASE("distance bins") {
    SUBCASE("one record") {
        const auto bins = distance_binned_errors({{0.7, 4.0}});
        REQUIRE(bins.size() == 4);
        CHECK(bins[0].count == 1);
        CHECK(bins[0].lo == 0.5);
        CHECK(bins[0].hi == 1.0);
        CHECK(bins[3].hi == 2.5);
        for (int i = 1; i < 4; ++i) {
            CHECK(bins[i].count == 0);
            CHECK_FALSE(bins[i].mean_ape.has_value());
        }
    }
    SUBCASE("all at one distance") {
        const auto bins = distance_binned_errors({{1.7, 1.0}, {1.7, 2.0}, {1.7, 6.0}});
        CHECK(bins[2].count == 3);
        CHECK(*bins[2].mean_ape == doctest::Approx(3.0));
        CHECK(*bins[2].median_ape == 2.0);
    }
    SUBCASE("edges and out of range") {
        const auto bins = distance_binned_errors({{1.0, 1}, {2.5, 1}, {0.2, 1}, {3.0, 1}});
        CHECK(bins[1].count == 1);  // 1.0 opens the second bin
        CHECK(bins[3].count == 2);  // 2.5 closes the last bin, 3.0 clamps
        CHECK(bins[3].out_of_range == 1);
        CHECK(bins[0].count == 1);
        CHECK(bins[0].out_of_range == 1);
    }
    SUBCASE("mixed records match a group-by oracle") {
        std::mt19937 rng(12);
        std::uniform_real_distribution<double> d(0.5, 2.5), e(0, 30);
        std::vector<DistanceRecord> recs;
        std::map<int, std::vector<double>> groups;
        for (int i = 0; i < 200; ++i) {
            recs.push_back({d(rng), e(rng)});
            groups[std::min(3, static_cast<int>((recs.back().distance_m - 0.5) / 0.5))].push_back(recs.back().ape);
        }
        const auto bins = distance_binned_errors(recs);
        for (int b = 0; b < 4; ++b) {
            CHECK(bins[b].count == groups[b].size());
            CHECK(*bins[b].mean_ape == doctest::Approx(oracle::mean(groups[b])).epsilon(1e-12));
            CHECK(*bins[b].std_ape == doctest::Approx(oracle::pop_std(groups[b])).epsilon(1e-12));
        }
    }
}

TEST_CASE("fold aggregation") {
    SUBCASE("identical reports have zero spread") {
        const FoldAggregate a = aggregate_folds({report_with_f1(0.8), report_with_f1(0.8), report_with_f1(0.8)});
        CHECK(a.mean.f1 == doctest::Approx(0.8));
        CHECK(a.std.f1 < 1e-12);
        CHECK(a.std.precision < 1e-12);
        CHECK(*a.std.r2 < 1e-12);
    }
    SUBCASE("five folds") {
        std::vector<EvalReport> r;
        for (double f : {1.0, 0.98, 1.0, 1.0, 1.0}) r.push_back(report_with_f1(f));
        const FoldAggregate a = aggregate_folds(r);
        CHECK(a.mean.f1 == doctest::Approx(0.996));
        CHECK(a.std.f1 == doctest::Approx(0.008).epsilon(1e-9));
    }
    SUBCASE("two folds") {
        const FoldAggregate a = aggregate_folds({report_with_f1(0), report_with_f1(1)});
        CHECK(a.mean.f1 == 0.5);
        CHECK(a.std.f1 == 0.5);
    }
    SUBCASE("needs two reports") {
        CHECK_THROWS_AS(aggregate_folds({report_with_f1(1)}), Error);
    }
}

TEST_CASE("image-level evaluation") {
    ImageEval img;
    img.gts.push_back({box(0, 0, 5, 5), 100.0, 0.7});
    img.gts.push_back({box(10, 10, 5, 5), 200.0, 1.2});
    img.preds.push_back({box(0, 0, 5, 5), 0.95, 110.0, std::nullopt});
    img.preds.push_back({box(10, 10, 5, 5), 0.3, 190.0, std::nullopt});  // below the confidence cut
    const EvalReport r = evaluate_images({img});
    CHECK(r.n_predictions == 1);
    CHECK(r.n_matched == 1);
    CHECK(r.precision == 1.0);
    CHECK(r.recall == 0.5);
    CHECK(r.f1 == doctest::Approx(2.0 / 3.0));
    CHECK(r.ape_mean == doctest::Approx(10.0));
    CHECK(r.ape_median == doctest::Approx(10.0));
    CHECK_FALSE(r.r2.has_value());  // one regression pair
    CHECK_FALSE(r.note.empty());
    CHECK(r.distance_bins[0].count == 1);
    CHECK(r.avg_confidence == doctest::Approx(0.95));

    const EvalReport all = evaluate_images({img}, 0.9, 0.0);
    CHECK(all.f1 == 1.0);
    REQUIRE(all.r2.has_value());
    CHECK(*all.r2 == doctest::Approx(1.0 - 200.0 / 5000.0));
}

TEST_CASE("report serialization") {
    EvalReport r = report_with_f1(0.75);
    r.distance_bins = distance_binned_errors({{0.6, 2.0}});
    const auto doc = nlohmann::json::parse(report_to_json(r));
    CHECK(doc["f1"] == 0.75);
    CHECK(doc["distance_bins"].size() == 4);
    const std::string csv = bins_to_csv(r.distance_bins);
    CHECK(csv.rfind("bin_lo_m,bin_hi_m,count,mean_ape,median_ape,std_ape,out_of_range\n", 0) == 0);
    CHECK(csv.find("0.5,1.0,1,2.0,2.0,0.0,0\n") != std::string::npos);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 5);
}

TEST_CASE("evaluating result rows and prediction files against a dataset") {
    testsupport::TempDir dir("eval");
    SynthConfig cfg;
    cfg.count = 3;
    const Dataset ds = load_dataset(generate_dataset(cfg, dir.path()));

    std::vector<ResultRow> rows;
    for (const AnnotatedInstance& inst : ds.instances) {
        ResultRow r;
        r.image_id = inst.image_id;
        r.instance_id = inst.instance_id;
        r.gt_area_cm2 = inst.gt_area_cm2;
        r.pred_area_cm2 = inst.gt_area_cm2 * 1.1;
        r.distance_m = 1.0;
        rows.push_back(r);
    }
    rows[2].pred_area_cm2.reset();
    rows[2].error = "cluster: no cluster";
    const EvalReport rep = evaluate_results(rows, ds);
    CHECK(rep.n_predictions == 2);
    CHECK(rep.n_ground_truth == 3);
    CHECK(rep.recall == doctest::Approx(2.0 / 3.0));
    CHECK(rep.ape_mean == doctest::Approx(10.0));

    nlohmann::json preds;
    preds["predictions"] = nlohmann::json::array();
    for (const AnnotatedInstance& inst : ds.instances) {
        nlohmann::json seg = nlohmann::json::array();
        for (const Polygon& poly : inst.polygons) {
            nlohmann::json flat = nlohmann::json::array();
            for (const auto& p : poly) {
                flat.push_back(p.x());
                flat.push_back(p.y());
            }
            seg.push_back(flat);
        }
        preds["predictions"].push_back({{"image_id", inst.image_id},
                                        {"segmentation", seg},
                                        {"confidence", 0.9},
                                        {"pred_area_cm2", inst.gt_area_cm2 * 0.95}});
    }
    testsupport::spit(dir / "preds.json", preds.dump());
    const EvalReport fr = evaluate_prediction_file(dir / "preds.json", ds);
    CHECK(fr.f1 == 1.0);
    CHECK(fr.avg_ioa == 1.0);
    CHECK(fr.ape_mean == doctest::Approx(5.0));
    std::size_t binned = 0;
    for (const DistanceBin& b : fr.distance_bins) binned += b.count;
    CHECK(binned == 3);

    testsupport::spit(dir / "bad.json", "{\"predictions\": [{\"image_id\": 1}]}");
    CHECK_THROWS_AS(evaluate_prediction_file(dir / "bad.json", ds), Error);
}
