#pragma once

#include <cstddef>
#include <optional>
#include <string>

#include "leafarea/cloud.hpp"
#include "leafarea/common.hpp"
#include "leafarea/depth_filter.hpp"
#include "leafarea/mesh.hpp"

namespace leafarea {

struct PipelineConfig {
    BilateralParams bilateral;
    int median_kernel = 5;
    DbscanParams dbscan;
    int normal_neighbors = 30;
    MeshingConfig meshing;

    void validate() const;
};

struct PipelineDiagnostics {
    std::size_t masked_pixels = 0;
    std::size_t points_backprojected = 0;
    std::size_t points_clustered = 0;
    std::size_t triangles_reconstructed = 0;
    std::size_t triangles_trimmed = 0;
    std::size_t triangles_deduplicated = 0;
    std::size_t triangles_decimated = 0;
    std::optional<PoissonStats> poisson;
    double distance_m = 0;  // median z over the mask's valid raw depth
};

struct AreaEstimate {
    double area_cm2 = 0;
    TriangleMesh mesh;
    PointCloud cloud;  // clustered cloud with normals
    PipelineDiagnostics diagnostics;
};

/// Error raised by a pipeline stage; what() is "<stage>: <message>".
class StageError : public Error {
public:
    StageError(const std::string& stage, const Error& cause)
        : Error(cause.kind(), stage + ": " + cause.what()), stage_(stage) {}
    const std::string& stage() const noexcept { return stage_; }

private:
    std::string stage_;
};

/// Median z in meters over masked pixels with non-zero raw depth.
std::optional<double> median_mask_distance(const RgbdFrame& frame, const Mask& mask);

/// Filters -> back-projection -> clustering -> normals -> meshing -> trim ->
/// dedupe -> decimation -> smoothing -> area. Filtering runs on the mask's
/// bounding box plus the filter support, which gives the same values there
/// as filtering the whole frame.
AreaEstimate estimate_leaf_area_ip(const RgbdFrame& frame, const Mask& mask,
                                   const PipelineConfig& config);

}  // namespace leafarea
