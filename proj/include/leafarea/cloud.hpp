#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include "leafarea/common.hpp"

namespace leafarea {

struct PixelIndex {
    int u = 0, v = 0;
    bool operator==(const PixelIndex&) const = default;
};

/// Points in meters, camera frame (+z forward). `normals`, `colors` and
/// `pixels` are either empty or parallel to `points`. `pixels` and `camera`
/// record where each point came from when the cloud was back-projected.
struct PointCloud {
    std::vector<Vec3> points;
    std::vector<Vec3> normals;
    std::vector<Rgb> colors;
    std::vector<PixelIndex> pixels;
    std::optional<CameraIntrinsics> camera;

    std::size_t size() const noexcept { return points.size(); }
    bool empty() const noexcept { return points.empty(); }
    bool has_normals() const noexcept { return !normals.empty(); }

    /// Keeps the listed points (in the given order) and their attributes.
    PointCloud select(const std::vector<int>& indices) const;
    void validate() const;
};

struct DbscanParams {
    double eps = 0.01;  // meters
    int min_pts = 30;

    void validate() const {
        require(eps > 0, "dbscan: eps must be > 0");
        require(min_pts >= 1, "dbscan: min_pts must be >= 1");
    }
};

inline constexpr int kNoise = -1;

/// One point per masked pixel with non-zero depth.
PointCloud backproject_masked(const RgbdFrame& frame, const Mask& mask);

/// DBSCAN labels: kNoise or a cluster id in discovery order. A point counts
/// itself among its eps-neighbors; distances <= eps are neighbors.
std::vector<int> dbscan(std::span<const Vec3> points, const DbscanParams& params);

/// Keeps the most populous DBSCAN cluster (lowest label on ties).
PointCloud cluster_filter(const PointCloud& cloud, const DbscanParams& params);

/// PCA normals from the k nearest neighbors, each flipped to face the camera
/// at the origin.
PointCloud estimate_oriented_normals(const PointCloud& cloud, int k_neighbors = 30);

/// ASCII PLY with x y z nx ny nz red green blue.
void write_ply(const PointCloud& cloud, const std::filesystem::path& path);

}  // namespace leafarea
