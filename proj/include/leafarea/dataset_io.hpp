#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "leafarea/common.hpp"

namespace leafarea {

/// Ground-truth area placeholder for leaves that were never measured.
inline constexpr double kUnknownArea = -1.0;

using Polygon = std::vector<Eigen::Vector2d>;

/// Even-odd fill sampled at pixel centers (u + 0.5, v + 0.5).
/// Several polygons are OR-ed together.
Mask rasterize_polygons(const std::vector<Polygon>& polygons, int width, int height);

struct AnnotatedInstance {
    std::int64_t instance_id = 0;
    std::int64_t image_id = 0;
    std::int64_t category = 1;
    std::vector<Polygon> polygons;
    Mask bitmask;
    double gt_area_cm2 = kUnknownArea;

    bool has_gt_area() const noexcept { return gt_area_cm2 >= 0.0; }
};

struct FrameDescriptor {
    std::int64_t image_id = 0;
    std::string file_name;        // relative to dataset root
    std::string depth_file_name;  // relative to dataset root
    double depth_scale = 0.001;
    CameraIntrinsics intrinsics;
};

enum class SplitTag { Train, Val, Test };

struct Dataset {
    std::filesystem::path root;
    std::map<std::int64_t, FrameDescriptor> frames;
    std::vector<AnnotatedInstance> instances;
    SplitTag split = SplitTag::Train;

    const FrameDescriptor& frame(std::int64_t image_id) const;
    /// Reads color + depth rasters for one frame.
    RgbdFrame load_frame(std::int64_t image_id) const;
};

/// Parses a COCO-style annotation file and rasterizes every polygon.
/// Image files are checked for existence and matching dimensions but not decoded.
Dataset load_dataset(const std::filesystem::path& annotation_path);

/// Writes the annotation JSON only (images are the caller's responsibility).
void save_annotations(const Dataset& dataset, const std::filesystem::path& annotation_path);

struct Fold {
    Dataset train;
    Dataset val;
};

/// Image-level k-fold split. Remainder images go to the lowest-index folds.
std::vector<Fold> kfold_split(const Dataset& dataset, int k, std::uint64_t seed);

/// Dataset restricted to the given image ids (instances follow their image).
Dataset subset(const Dataset& dataset, const std::vector<std::int64_t>& image_ids,
               SplitTag tag);

struct ResultRow {
    std::int64_t image_id = 0;
    std::int64_t instance_id = 0;
    std::optional<double> pred_area_cm2;
    double gt_area_cm2 = kUnknownArea;
    double ioa = 1.0;
    double confidence = 1.0;
    std::optional<double> distance_m;
    std::string error;  // empty on success
};

inline const char* kResultsHeader =
    "image_id,instance_id,pred_area_cm2,gt_area_cm2,ioa,confidence,distance_m,error";

/// Shortest round-trip decimal with '.' separator and at least one fractional
/// digit, e.g. -1 -> "-1.0".
std::string format_real(double v);

void write_results(const std::vector<ResultRow>& rows, const std::filesystem::path& path);
std::string results_to_csv(const std::vector<ResultRow>& rows);
std::vector<ResultRow> read_results(const std::filesystem::path& path);

}  // namespace leafarea
