#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "leafarea/common.hpp"

namespace leafarea {

/// |pred & gt| / |gt|. Throws on an empty gt mask.
double intersection_over_area(const Mask& pred, const Mask& gt);

struct MatchPair {
    int pred = 0, gt = 0;
    double ioa = 0;
};

struct MatchResult {
    std::vector<MatchPair> pairs;
    std::vector<int> unmatched_preds;
    std::vector<int> unmatched_gts;
};

inline constexpr double kDefaultIoaThreshold = 0.9;

/// Greedy one-to-one matching in descending IoA order (ties: lower pred, then
/// lower gt index) over pairs with IoA >= threshold.
MatchResult match_instances(const std::vector<Mask>& preds, const std::vector<Mask>& gts,
                            double ioa_threshold = kDefaultIoaThreshold);

struct RegressionMetrics {
    double r2 = 0;
    double ape_mean = 0, ape_std = 0, ape_median = 0;  // percent
};

/// APE_i = 100 |p - g| / g with population std. Throws when gts are all equal
/// (r2 undefined) or any gt <= 0.
RegressionMetrics regression_metrics(const std::vector<double>& pred, const std::vector<double>& gt);

double ape_percent(double pred, double gt);

struct DistanceRecord {
    double distance_m = 0;
    double ape = 0;
};

struct DistanceBin {
    double lo = 0, hi = 0;
    std::size_t count = 0;
    std::optional<double> mean_ape, median_ape, std_ape;
    std::size_t out_of_range = 0;  // records clamped into this edge bin
};

/// Bins [lo, lo+w), ..., with the last bin closed at hi. Records outside
/// [lo, hi] go to the nearest edge bin and are counted in out_of_range.
std::vector<DistanceBin> distance_binned_errors(const std::vector<DistanceRecord>& records,
                                                double bin_width_m = 0.5, double lo = 0.5,
                                                double hi = 2.5);

struct EvalReport {
    std::size_t n_predictions = 0, n_ground_truth = 0, n_matched = 0, n_regression = 0;
    double f1 = 0, precision = 0, recall = 0;
    double avg_ioa = 0, avg_confidence = 0;
    std::optional<double> r2;
    double ape_mean = 0, ape_std = 0, ape_median = 0;
    std::vector<DistanceBin> distance_bins;
    std::string note;  // why a metric is missing, if any
};

double f1_score(double precision, double recall);

/// One candidate prediction, already restricted to an image.
struct ScoredPrediction {
    Mask bitmask;
    double confidence = 1.0;
    std::optional<double> area_cm2;
    std::optional<double> distance_m;
};

struct GroundTruth {
    Mask bitmask;
    double area_cm2 = -1.0;  // -1: unknown, excluded from regression
    std::optional<double> distance_m;
};

struct ImageEval {
    std::vector<ScoredPrediction> preds;
    std::vector<GroundTruth> gts;
};

/// A matched pair carried into the regression and distance statistics.
struct MatchedRecord {
    double ioa = 1.0, confidence = 1.0;
    std::optional<double> pred_area_cm2;
    double gt_area_cm2 = -1.0;
    std::optional<double> distance_m;
};

/// Builds a report from already matched pairs plus the prediction and gt
/// totals they were drawn from.
EvalReport build_report(const std::vector<MatchedRecord>& matched, std::size_t n_predictions,
                        std::size_t n_ground_truth);

/// Drops predictions below min_confidence, matches per image, then reports.
EvalReport evaluate_images(const std::vector<ImageEval>& images, double ioa_threshold = kDefaultIoaThreshold,
                           double min_confidence = 0.5);

/// Fieldwise mean and population std over >= 2 reports.
struct FoldAggregate {
    EvalReport mean, std;
};
FoldAggregate aggregate_folds(const std::vector<EvalReport>& reports);

std::string report_to_json(const EvalReport& report, int indent = 2);
std::string bins_to_csv(const std::vector<DistanceBin>& bins);

}  // namespace leafarea
