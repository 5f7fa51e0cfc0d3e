#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "leafarea/dataset_io.hpp"
#include "leafarea/evaluation.hpp"
#include "leafarea/pipeline.hpp"
#include "leafarea/synthetic.hpp"

namespace leafarea {

/// Flat JSON with keys mirroring the module parameters, e.g.
/// {"backend": "heightfield", "bilateral_d": 10, "dbscan_eps": 0.01}.
/// Keys not present keep the values of `base`; unknown keys are an error.
PipelineConfig pipeline_config_from_json(const std::string& text, const PipelineConfig& base = {});
std::string pipeline_config_to_json(const PipelineConfig& config);

/// {"count", "distances" (string or array), "min_area_cm2", "max_area_cm2",
///  "max_tilt_deg", "planar_only", "quant_step", "sp_prob", "noise_seed", "seed"}
SynthConfig synth_config_from_json(const std::string& text, const SynthConfig& base = {});

/// One row per annotated instance in dataset order. The gt mask stands in
/// for the detection (ioa = confidence = 1). Instance failures become rows
/// with an error message; only `workers` < 1 throws.
std::vector<ResultRow> estimate_dataset(const Dataset& dataset, const PipelineConfig& config,
                                        int workers = 1);

/// Each row with a prediction is a detection of its instance_id; it matches
/// when ioa >= ioa_threshold. Rows below min_confidence are ignored.
EvalReport evaluate_results(const std::vector<ResultRow>& rows, const Dataset& ground_truth,
                            double ioa_threshold = kDefaultIoaThreshold,
                            double min_confidence = 0.5);

/// Predictions as JSON: {"predictions": [{"image_id", "segmentation",
/// "confidence", "pred_area_cm2", "distance_m"?}]}, matched by mask IoA.
/// Distances default to the median gt-mask depth.
EvalReport evaluate_prediction_file(const std::filesystem::path& path, const Dataset& ground_truth,
                                    double ioa_threshold = kDefaultIoaThreshold,
                                    double min_confidence = 0.5);

struct CrossvalResult {
    int k = 0;
    std::uint64_t seed = 0;
    std::vector<std::vector<std::int64_t>> fold_images;
    std::vector<EvalReport> folds;
    FoldAggregate aggregate;
    std::vector<ResultRow> rows;
};

/// Estimates every instance once, then reports per validation fold.
CrossvalResult run_crossval(const Dataset& dataset, int k, std::uint64_t seed,
                            const PipelineConfig& config, int workers = 1,
                            double ioa_threshold = kDefaultIoaThreshold, double min_confidence = 0.5);

std::string crossval_to_json(const CrossvalResult& result);

}  // namespace leafarea
