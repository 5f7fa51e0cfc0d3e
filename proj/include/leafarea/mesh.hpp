#pragma once

#include <array>
#include <filesystem>
#include <string>
#include <vector>

#include "leafarea/cloud.hpp"
#include "leafarea/common.hpp"

namespace leafarea {

using Triangle = std::array<int, 3>;

struct TriangleMesh {
    std::vector<Vec3> vertices;       // meters
    std::vector<Triangle> triangles;
    std::vector<double> densities;    // empty or one per vertex

    bool has_densities() const noexcept { return !densities.empty(); }
    void validate() const;
};

enum class MeshBackend { Poisson, Heightfield };

MeshBackend parse_backend(const std::string& name);
const char* backend_name(MeshBackend b);

struct MeshingConfig {
    MeshBackend backend = MeshBackend::Poisson;
    int octree_depth = 9;
    int target_triangles = 100;
    int laplacian_iterations = 3;

    // poisson internals
    double screening_weight = 4.0;
    double samples_per_node = 1.5;
    double bounding_scale = 1.1;
    int band_cells = 3;
    double cg_tolerance = 1e-7;
    int cg_max_iterations = 20000;

    void validate() const;
};

/// Per-call statistics from the Poisson backend.
struct PoissonStats {
    int solve_depth = 0;
    std::size_t unknowns = 0;
    int cg_iterations = 0;
    double cg_error = 0;
    double iso_value = 0;
};

/// Dispatches to the configured backend. Requires oriented normals and at
/// least 50 points.
TriangleMesh reconstruct_surface(const PointCloud& cloud, const MeshingConfig& config,
                                 PoissonStats* stats = nullptr);

/// Screened Poisson reconstruction on a sparse narrow-band grid at the deepest
/// octree level (<= octree_depth) the sampling density supports. Vertex
/// densities hold the deepest octree level with a sample within one cell
/// (Chebyshev distance).
TriangleMesh reconstruct_poisson(const PointCloud& cloud, const MeshingConfig& config,
                                 PoissonStats* stats = nullptr);

/// Triangulates the pixel footprints of a back-projected cloud: every pixel
/// becomes a quad over its four corners (corner depth = mean of the adjacent
/// pixels present in the cloud), split into two triangles. Needs `pixels`
/// and `camera` on the cloud.
TriangleMesh reconstruct_heightfield(const PointCloud& cloud);

/// Drops vertices whose density is strictly below the mean, their incident
/// triangles, and reindexes.
TriangleMesh trim_low_density(const TriangleMesh& mesh);

/// Collapses triangles with the same unordered vertex set to one.
TriangleMesh remove_duplicate_triangles(const TriangleMesh& mesh);

/// Removes triangles with repeated indices and vertices no triangle uses.
TriangleMesh remove_degenerate(const TriangleMesh& mesh);

/// Quadric-error edge collapse down to at most `target_triangles`.
TriangleMesh decimate_quadric(const TriangleMesh& mesh, int target_triangles);

/// Uniform-weight Laplacian smoothing; boundary vertices average their
/// boundary neighbors only.
TriangleMesh smooth_laplacian(const TriangleMesh& mesh, int iterations);

/// Sum of triangle areas in m^2.
double surface_area(const TriangleMesh& mesh);
inline double m2_to_cm2(double m2) { return m2 * 1e4; }

void write_ply(const TriangleMesh& mesh, const std::filesystem::path& path);
void write_obj(const TriangleMesh& mesh, const std::filesystem::path& path);

}  // namespace leafarea
