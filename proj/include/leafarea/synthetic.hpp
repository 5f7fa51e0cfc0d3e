#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "leafarea/common.hpp"
#include "leafarea/dataset_io.hpp"

namespace leafarea {

/// Flat ellipse in the local xy-plane, semi-axes in cm.
struct PlanarEllipse {
    double a_cm = 0, b_cm = 0;
};

/// Circular-arc cross-section in the local xz-plane, extruded along local y.
/// The patch passes through the local origin and its edges curl towards -z.
struct CylindricalPatch {
    double radius_cm = 0, arc_rad = 0, width_cm = 0;
};

using LeafShape = std::variant<PlanarEllipse, CylindricalPatch>;

/// Local-to-camera placement; local +z points away from the camera when the
/// rotation is the identity.
struct Pose {
    Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
    Vec3 translation = Vec3::Zero();  // meters
};

struct LeafSurface {
    LeafShape shape;
    Pose pose;
    double analytic_area_cm2 = 0;

    /// Nearest ray parameter s > 0 with origin + s * dir on the surface.
    std::optional<double> intersect(const Vec3& origin, const Vec3& dir) const;
    /// Boundary curve in camera coordinates, `samples` points per closed loop.
    std::vector<Vec3> outline(int samples) const;
};

LeafSurface make_leaf_surface(const LeafShape& shape, const Pose& pose = {});

const char* shape_name(const LeafShape& shape);

struct NoiseSpec {
    int quant_step = 4;     // raw units, 0 disables
    double sp_prob = 0.002;
    std::uint64_t seed = 0;

    static NoiseSpec none() { return {0, 0.0, 0}; }
    void validate() const;
};

/// Rounds to the nearest multiple of quant_step, then sets each pixel to 0 or
/// 65535 with probability sp_prob / 2 each.
DepthRaster corrupt_depth(const DepthRaster& depth, const NoiseSpec& noise);

struct SyntheticFrame {
    RgbdFrame frame;
    Mask mask;                 // pixels whose center ray hits the leaf
    Polygon outline;           // projected boundary in annotation coordinates
    double area_cm2 = 0;
};

inline constexpr double kBackgroundOffset = 0.5;  // meters behind the leaf

/// Ray-casts the leaf with its local origin at (tx, ty, distance_m) where
/// tx, ty come from the pose, in front of a textured fronto-parallel plane
/// kBackgroundOffset behind it. Raw depth is z / 0.001.
SyntheticFrame render_rgbd(const LeafSurface& surface, const CameraIntrinsics& intrinsics,
                           double distance_m, const NoiseSpec& noise);

CameraIntrinsics default_synthetic_intrinsics();

struct SynthConfig {
    int count = 30;
    std::vector<double> distances{0.5, 1.0, 1.5, 2.0, 2.5};
    double min_area_cm2 = 20, max_area_cm2 = 150;
    double max_tilt_deg = 35;
    bool planar_only = false;
    NoiseSpec noise;
    std::uint64_t seed = 42;
    CameraIntrinsics intrinsics = default_synthetic_intrinsics();

    void validate() const;
};

/// Parses "start:stop:step" (inclusive stop) or a comma-separated list.
std::vector<double> parse_distances(const std::string& spec);

struct SynthLeaf {
    std::int64_t image_id = 0;
    LeafSurface surface;
    double distance_m = 0;
};

/// Leaf i is drawn from the seeded generator and placed at
/// distances[i % distances.size()].
std::vector<SynthLeaf> plan_synthetic_leaves(const SynthConfig& config);

/// Writes color/, depth/ and annotations.json under `out_dir`, one leaf per
/// image, and returns the annotation path.
std::filesystem::path generate_dataset(const SynthConfig& config,
                                       const std::filesystem::path& out_dir);

}  // namespace leafarea
