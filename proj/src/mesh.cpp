#include "leafarea/mesh.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <numeric>
#include <set>

namespace leafarea {

void TriangleMesh::validate() const {
    const int n = static_cast<int>(vertices.size());
    require(densities.empty() || densities.size() == vertices.size(),
            "mesh: densities length mismatch");
    for (const Triangle& t : triangles) {
        for (int i : t) require(i >= 0 && i < n, "mesh: triangle index out of range");
        require(t[0] != t[1] && t[1] != t[2] && t[0] != t[2],
                "mesh: triangle with repeated vertex index");
    }
}

MeshBackend parse_backend(const std::string& name) {
    if (name == "poisson") return MeshBackend::Poisson;
    if (name == "heightfield") return MeshBackend::Heightfield;
    fail(ErrorKind::InvalidArgument, "unknown meshing backend '" + name + "'");
}

const char* backend_name(MeshBackend b) {
    return b == MeshBackend::Poisson ? "poisson" : "heightfield";
}

void MeshingConfig::validate() const {
    require(octree_depth >= 4 && octree_depth <= 10, "meshing: octree_depth must be in [4, 10]");
    require(target_triangles >= 4, "meshing: target_triangles must be >= 4");
    require(laplacian_iterations >= 0, "meshing: laplacian_iterations must be >= 0");
    require(screening_weight >= 0, "meshing: screening_weight must be >= 0");
    require(samples_per_node > 0, "meshing: samples_per_node must be > 0");
    require(bounding_scale >= 1.0, "meshing: bounding_scale must be >= 1");
    require(band_cells >= 1, "meshing: band_cells must be >= 1");
    require(cg_max_iterations >= 1, "meshing: cg_max_iterations must be >= 1");
}

TriangleMesh reconstruct_surface(const PointCloud& cloud, const MeshingConfig& config,
                                 PoissonStats* stats) {
    config.validate();
    if (cloud.size() < 50)
        fail(ErrorKind::Degenerate, "reconstruct_surface: insufficient points (" +
                                        std::to_string(cloud.size()) + " < 50)");
    if (!cloud.has_normals()) fail(ErrorKind::InvalidArgument, "reconstruct_surface: normals missing");
    cloud.validate();
    TriangleMesh mesh = config.backend == MeshBackend::Poisson
                            ? reconstruct_poisson(cloud, config, stats)
                            : reconstruct_heightfield(cloud);
    return remove_degenerate(mesh);
}

namespace {

TriangleMesh keep_vertices(const TriangleMesh& mesh, const std::vector<char>& keep,
                           bool drop_unreferenced) {
    std::vector<char> used(mesh.vertices.size(), drop_unreferenced ? 0 : 1);
    std::vector<Triangle> tris;
    for (const Triangle& t : mesh.triangles) {
        if (!keep[t[0]] || !keep[t[1]] || !keep[t[2]]) continue;
        if (t[0] == t[1] || t[1] == t[2] || t[0] == t[2]) continue;
        tris.push_back(t);
        for (int i : t) used[i] = 1;
    }
    std::vector<int> remap(mesh.vertices.size(), -1);
    TriangleMesh out;
    for (std::size_t i = 0; i < mesh.vertices.size(); ++i) {
        if (!keep[i] || !used[i]) continue;
        remap[i] = static_cast<int>(out.vertices.size());
        out.vertices.push_back(mesh.vertices[i]);
        if (mesh.has_densities()) out.densities.push_back(mesh.densities[i]);
    }
    out.triangles.reserve(tris.size());
    for (const Triangle& t : tris) out.triangles.push_back({remap[t[0]], remap[t[1]], remap[t[2]]});
    return out;
}

}  // namespace

TriangleMesh remove_degenerate(const TriangleMesh& mesh) {
    return keep_vertices(mesh, std::vector<char>(mesh.vertices.size(), 1), true);
}

TriangleMesh trim_low_density(const TriangleMesh& mesh) {
    if (!mesh.has_densities()) fail(ErrorKind::InvalidArgument, "trim_low_density: densities absent");
    if (mesh.vertices.empty()) return mesh;
    const double mean = std::accumulate(mesh.densities.begin(), mesh.densities.end(), 0.0) /
                        static_cast<double>(mesh.densities.size());
    std::vector<char> keep(mesh.vertices.size());
    for (std::size_t i = 0; i < keep.size(); ++i) keep[i] = !(mesh.densities[i] < mean);
    return keep_vertices(mesh, keep, false);
}

TriangleMesh remove_duplicate_triangles(const TriangleMesh& mesh) {
    TriangleMesh out;
    out.vertices = mesh.vertices;
    out.densities = mesh.densities;
    std::set<Triangle> seen;
    for (const Triangle& t : mesh.triangles) {
        Triangle key = t;
        std::sort(key.begin(), key.end());
        if (seen.insert(key).second) out.triangles.push_back(t);
    }
    return out;
}

TriangleMesh smooth_laplacian(const TriangleMesh& mesh, int iterations) {
    require(iterations >= 0, "smooth_laplacian: iterations must be >= 0");
    if (iterations == 0 || mesh.triangles.empty()) return mesh;

    const std::size_t n = mesh.vertices.size();
    std::map<std::pair<int, int>, int> edge_use;
    for (const Triangle& t : mesh.triangles)
        for (int k = 0; k < 3; ++k) {
            const int a = t[k], b = t[(k + 1) % 3];
            ++edge_use[{std::min(a, b), std::max(a, b)}];
        }
    std::vector<std::vector<int>> ring(n), boundary_ring(n);
    for (const auto& [e, count] : edge_use) {
        ring[e.first].push_back(e.second);
        ring[e.second].push_back(e.first);
        if (count == 1) {
            boundary_ring[e.first].push_back(e.second);
            boundary_ring[e.second].push_back(e.first);
        }
    }

    TriangleMesh out = mesh;
    std::vector<Vec3> next(n);
    for (int it = 0; it < iterations; ++it) {
        for (std::size_t i = 0; i < n; ++i) {
            const auto& nb = boundary_ring[i].empty() ? ring[i] : boundary_ring[i];
            if (nb.empty()) {
                next[i] = out.vertices[i];
                continue;
            }
            Vec3 c = Vec3::Zero();
            for (int j : nb) c += out.vertices[j];
            next[i] = c / static_cast<double>(nb.size());
        }
        out.vertices.swap(next);
    }
    return out;
}

double surface_area(const TriangleMesh& mesh) {
    double area = 0;
    for (const Triangle& t : mesh.triangles) {
        const Vec3& a = mesh.vertices[t[0]];
        area += 0.5 * (mesh.vertices[t[1]] - a).cross(mesh.vertices[t[2]] - a).norm();
    }
    return area;
}

void write_ply(const TriangleMesh& mesh, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) fail(ErrorKind::Io, "cannot write " + path.string());
    out << "ply\nformat ascii 1.0\nelement vertex " << mesh.vertices.size()
        << "\nproperty float x\nproperty float y\nproperty float z\n";
    if (mesh.has_densities()) out << "property float density\n";
    out << "element face " << mesh.triangles.size()
        << "\nproperty list uchar int vertex_indices\nend_header\n";
    out.precision(9);
    for (std::size_t i = 0; i < mesh.vertices.size(); ++i) {
        const Vec3& p = mesh.vertices[i];
        out << p.x() << ' ' << p.y() << ' ' << p.z();
        if (mesh.has_densities()) out << ' ' << mesh.densities[i];
        out << '\n';
    }
    for (const Triangle& t : mesh.triangles) out << "3 " << t[0] << ' ' << t[1] << ' ' << t[2] << '\n';
}

void write_obj(const TriangleMesh& mesh, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) fail(ErrorKind::Io, "cannot write " + path.string());
    out.precision(9);
    for (const Vec3& p : mesh.vertices) out << "v " << p.x() << ' ' << p.y() << ' ' << p.z() << '\n';
    for (const Triangle& t : mesh.triangles)
        out << "f " << t[0] + 1 << ' ' << t[1] + 1 << ' ' << t[2] + 1 << '\n';
}

}  // namespace leafarea
