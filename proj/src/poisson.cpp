// Screened Poisson surface reconstruction on a sparse narrow-band grid.
//
// Points are mapped into the unit cube. The octree is refined to the deepest
// level whose occupied cells still hold `samples_per_node` samples on average,
// and the indicator function chi is solved on the grid nodes of every cell
// within `band_cells` of an occupied cell. chi minimizes
//
//   sum_edges h * (chi_j - chi_i - h * V_ij)^2 + alpha * 2^d * sum_s A_s chi(p_s)^2
//
// where V is the trilinearly splatted, area-weighted normal field and A_s the
// surface area a sample stands for. Natural boundary conditions hold at the
// band's outer faces. The iso-surface at the area-weighted mean of chi over
// the samples is extracted with marching tetrahedra.

#include <algorithm>
#include <cmath>
#include <numbers>
#include <unordered_map>
#include <unordered_set>

#include <Eigen/IterativeLinearSolvers>
#include <Eigen/Sparse>

#include "leafarea/mesh.hpp"
#include "leafarea/spatial.hpp"

namespace leafarea {
namespace {

using Key = std::uint64_t;
using Cell = std::array<std::int64_t, 3>;

Key key_of(const Cell& c) { return CellKey::pack(c[0], c[1], c[2]); }

Cell cell_at(const Vec3& u, double h, std::int64_t max_index) {
    Cell c;
    for (int a = 0; a < 3; ++a)
        c[a] = std::clamp<std::int64_t>(static_cast<std::int64_t>(std::floor(u[a] / h)), 0, max_index);
    return c;
}

struct UnitFrame {
    Vec3 center;
    double side;
    Vec3 to_unit(const Vec3& x) const { return (x - center) / side + Vec3::Constant(0.5); }
    Vec3 to_world(const Vec3& u) const { return (u - Vec3::Constant(0.5)) * side + center; }
};

// Samples per occupied cell at every level 0..max_depth.
std::vector<std::unordered_map<Key, std::vector<int>>> bucket_levels(const std::vector<Vec3>& unit,
                                                                     int max_depth) {
    std::vector<std::unordered_map<Key, std::vector<int>>> levels(max_depth + 1);
    for (int l = 0; l <= max_depth; ++l) {
        const std::int64_t res = std::int64_t{1} << l;
        const double h = 1.0 / static_cast<double>(res);
        for (int s = 0; s < static_cast<int>(unit.size()); ++s)
            levels[l][key_of(cell_at(unit[s], h, res - 1))].push_back(s);
    }
    return levels;
}

int choose_depth(const std::vector<std::unordered_map<Key, std::vector<int>>>& levels,
                 std::size_t samples, double samples_per_node) {
    for (int l = static_cast<int>(levels.size()) - 1; l > 0; --l)
        if (static_cast<double>(samples) / levels[l].size() >= samples_per_node) return l;
    return 1;
}

// Deepest level with a sample inside the cube of half-width one cell around u.
double vertex_density(const Vec3& u, const std::vector<Vec3>& unit,
                      const std::vector<std::unordered_map<Key, std::vector<int>>>& levels,
                      int depth) {
    for (int l = depth; l >= 0; --l) {
        const std::int64_t res = std::int64_t{1} << l;
        const double h = 1.0 / static_cast<double>(res);
        const double half = 1.0 * h;
        const Cell lo = cell_at(u - Vec3::Constant(half), h, res - 1);
        const Cell hi = cell_at(u + Vec3::Constant(half), h, res - 1);
        for (std::int64_t z = lo[2]; z <= hi[2]; ++z)
            for (std::int64_t y = lo[1]; y <= hi[1]; ++y)
                for (std::int64_t x = lo[0]; x <= hi[0]; ++x) {
                    auto it = levels[l].find(key_of({x, y, z}));
                    if (it == levels[l].end()) continue;
                    for (int s : it->second)
                        if ((unit[s] - u).cwiseAbs().maxCoeff() <= half) return l;
                }
    }
    return 0;
}

// Kuhn decomposition of a cube into six tetrahedra sharing the 0-7 diagonal.
// Corner bit layout: x | y << 1 | z << 2.
constexpr int kTets[6][4] = {{0, 1, 3, 7}, {0, 1, 5, 7}, {0, 2, 3, 7},
                             {0, 2, 6, 7}, {0, 4, 5, 7}, {0, 4, 6, 7}};

}  // namespace

TriangleMesh reconstruct_poisson(const PointCloud& cloud, const MeshingConfig& config,
                                 PoissonStats* stats) {
    const std::size_t n = cloud.size();
    Vec3 lo = cloud.points[0], hi = lo;
    for (const Vec3& p : cloud.points) {
        lo = lo.cwiseMin(p);
        hi = hi.cwiseMax(p);
    }
    const double extent = (hi - lo).maxCoeff();
    if (!(extent > 0)) fail(ErrorKind::Degenerate, "poisson: all points coincide");
    const UnitFrame frame{0.5 * (lo + hi), extent * config.bounding_scale};

    std::vector<Vec3> unit(n);
    for (std::size_t s = 0; s < n; ++s) unit[s] = frame.to_unit(cloud.points[s]);

    const auto levels = bucket_levels(unit, config.octree_depth);
    const int depth = choose_depth(levels, n, config.samples_per_node);
    const std::int64_t res = std::int64_t{1} << depth;
    const double h = 1.0 / static_cast<double>(res);

    // area each sample represents, from the sample count within radius 2h
    std::vector<double> sample_area(n);
    {
        const double radius = 2.0 * h;
        const VoxelGrid grid(unit, radius);
        std::vector<int> nb;
        for (std::size_t s = 0; s < n; ++s) {
            grid.radius_query(unit[s], radius, nb);
            sample_area[s] = std::numbers::pi * radius * radius / static_cast<double>(nb.size());
        }
    }

    // active cells: occupied cells dilated by the band width (separably)
    std::unordered_set<Key> active_cells;
    std::vector<Cell> cells;
    for (const auto& [key, members] : levels[depth]) cells.push_back(cell_at(unit[members[0]], h, res - 1));
    for (int axis = 0; axis < 3; ++axis) {
        std::vector<Cell> grown;
        std::unordered_set<Key> seen;
        for (const Cell& c : cells)
            for (int d = -config.band_cells; d <= config.band_cells; ++d) {
                Cell m = c;
                m[axis] += d;
                if (m[axis] < 0 || m[axis] >= res) continue;
                if (seen.insert(key_of(m)).second) grown.push_back(m);
            }
        cells.swap(grown);
    }
    std::sort(cells.begin(), cells.end());
    for (const Cell& c : cells) active_cells.insert(key_of(c));

    // nodes: corners of active cells, indexed in sorted order
    std::vector<Cell> nodes;
    {
        std::unordered_set<Key> seen;
        for (const Cell& c : cells)
            for (int corner = 0; corner < 8; ++corner) {
                const Cell v{c[0] + (corner & 1), c[1] + ((corner >> 1) & 1), c[2] + ((corner >> 2) & 1)};
                if (seen.insert(key_of(v)).second) nodes.push_back(v);
            }
        std::sort(nodes.begin(), nodes.end());
    }
    std::unordered_map<Key, int> node_index;
    node_index.reserve(nodes.size());
    for (int i = 0; i < static_cast<int>(nodes.size()); ++i) node_index.emplace(key_of(nodes[i]), i);
    const int num_nodes = static_cast<int>(nodes.size());

    // trilinear stencil of a sample: the 8 corners of its cell
    struct Stencil {
        int node[8];
        double weight[8];
    };
    auto stencil_of = [&](const Vec3& u) {
        const Cell c = cell_at(u, h, res - 1);
        Stencil st;
        const Vec3 f = (u / h - Vec3(static_cast<double>(c[0]), static_cast<double>(c[1]),
                                     static_cast<double>(c[2])))
                           .cwiseMax(0.0)
                           .cwiseMin(1.0);
        for (int corner = 0; corner < 8; ++corner) {
            const int bx = corner & 1, by = (corner >> 1) & 1, bz = (corner >> 2) & 1;
            st.node[corner] = node_index.at(key_of({c[0] + bx, c[1] + by, c[2] + bz}));
            st.weight[corner] = (bx ? f.x() : 1 - f.x()) * (by ? f.y() : 1 - f.y()) *
                                (bz ? f.z() : 1 - f.z());
        }
        return st;
    };
    std::vector<Stencil> stencils(n);
    for (std::size_t s = 0; s < n; ++s) stencils[s] = stencil_of(unit[s]);

    // splat the normal field
    std::vector<Vec3> field(num_nodes, Vec3::Zero());
    const double inv_h3 = 1.0 / (h * h * h);
    for (std::size_t s = 0; s < n; ++s)
        for (int k = 0; k < 8; ++k)
            field[stencils[s].node[k]] +=
                sample_area[s] * stencils[s].weight[k] * inv_h3 * cloud.normals[s];

    // normal equations
    std::vector<Eigen::Triplet<double>> triplets;
    triplets.reserve(static_cast<std::size_t>(num_nodes) * 7 + n * 64);
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(num_nodes);
    for (int i = 0; i < num_nodes; ++i)
        for (int axis = 0; axis < 3; ++axis) {
            Cell nb = nodes[i];
            ++nb[axis];
            auto it = node_index.find(key_of(nb));
            if (it == node_index.end()) continue;
            const int j = it->second;
            const double v_edge = 0.5 * (field[i][axis] + field[j][axis]);
            triplets.emplace_back(i, i, h);
            triplets.emplace_back(j, j, h);
            triplets.emplace_back(i, j, -h);
            triplets.emplace_back(j, i, -h);
            rhs[j] += h * h * v_edge;
            rhs[i] -= h * h * v_edge;
        }
    const double alpha = config.screening_weight * static_cast<double>(res);
    for (std::size_t s = 0; s < n; ++s)
        for (int a = 0; a < 8; ++a)
            for (int b = 0; b < 8; ++b)
                triplets.emplace_back(stencils[s].node[a], stencils[s].node[b],
                                      alpha * sample_area[s] * stencils[s].weight[a] *
                                          stencils[s].weight[b]);
    Eigen::SparseMatrix<double> system(num_nodes, num_nodes);
    system.setFromTriplets(triplets.begin(), triplets.end());
    triplets.clear();
    triplets.shrink_to_fit();

    Eigen::ConjugateGradient<Eigen::SparseMatrix<double>, Eigen::Lower | Eigen::Upper> cg;
    cg.setTolerance(config.cg_tolerance);
    cg.setMaxIterations(config.cg_max_iterations);
    cg.compute(system);
    const Eigen::VectorXd chi = cg.solve(rhs);
    if (cg.info() != Eigen::Success || !chi.allFinite())
        fail(ErrorKind::Numeric, "poisson: solver did not converge (residual " +
                                     std::to_string(cg.error()) + " after " +
                                     std::to_string(cg.iterations()) + " iterations)");

    double iso_num = 0, iso_den = 0;
    for (std::size_t s = 0; s < n; ++s) {
        double value = 0;
        for (int k = 0; k < 8; ++k) value += stencils[s].weight[k] * chi[stencils[s].node[k]];
        iso_num += sample_area[s] * value;
        iso_den += sample_area[s];
    }
    const double iso = iso_num / iso_den;

    // marching tetrahedra
    TriangleMesh mesh;
    std::unordered_map<std::uint64_t, int> edge_vertex;
    auto node_unit = [&](int i) -> Vec3 {
        return Vec3(static_cast<double>(nodes[i][0]), static_cast<double>(nodes[i][1]),
                    static_cast<double>(nodes[i][2])) * h;
    };
    auto crossing = [&](int a, int b) {
        if (a > b) std::swap(a, b);
        const std::uint64_t key = static_cast<std::uint64_t>(a) * static_cast<std::uint64_t>(num_nodes) +
                                  static_cast<std::uint64_t>(b);
        auto it = edge_vertex.find(key);
        if (it != edge_vertex.end()) return it->second;
        const double t = std::clamp((iso - chi[a]) / (chi[b] - chi[a]), 1e-4, 1.0 - 1e-4);
        const int id = static_cast<int>(mesh.vertices.size());
        mesh.vertices.push_back(frame.to_world(node_unit(a) + t * (node_unit(b) - node_unit(a))));
        edge_vertex.emplace(key, id);
        return id;
    };
    auto emit = [&](int v0, int v1, int v2, const Vec3& outward) {
        const Vec3 nrm = (mesh.vertices[v1] - mesh.vertices[v0]).cross(mesh.vertices[v2] - mesh.vertices[v0]);
        if (nrm.dot(outward) >= 0)
            mesh.triangles.push_back({v0, v1, v2});
        else
            mesh.triangles.push_back({v0, v2, v1});
    };

    for (const Cell& c : cells) {
        int corner_node[8];
        for (int corner = 0; corner < 8; ++corner)
            corner_node[corner] = node_index.at(
                key_of({c[0] + (corner & 1), c[1] + ((corner >> 1) & 1), c[2] + ((corner >> 2) & 1)}));
        for (const auto& tet : kTets) {
            int in[4], out[4], n_in = 0, n_out = 0;
            for (int k = 0; k < 4; ++k) {
                const int node = corner_node[tet[k]];
                if (chi[node] < iso)
                    in[n_in++] = node;
                else
                    out[n_out++] = node;
            }
            if (n_in == 0 || n_out == 0) continue;
            Vec3 in_c = Vec3::Zero(), out_c = Vec3::Zero();
            for (int k = 0; k < n_in; ++k) in_c += node_unit(in[k]);
            for (int k = 0; k < n_out; ++k) out_c += node_unit(out[k]);
            const Vec3 outward = out_c / n_out - in_c / n_in;
            if (n_in == 1) {
                emit(crossing(in[0], out[0]), crossing(in[0], out[1]), crossing(in[0], out[2]), outward);
            } else if (n_out == 1) {
                emit(crossing(out[0], in[0]), crossing(out[0], in[1]), crossing(out[0], in[2]), outward);
            } else {
                const int q0 = crossing(in[0], out[0]), q1 = crossing(in[0], out[1]);
                const int q2 = crossing(in[1], out[1]), q3 = crossing(in[1], out[0]);
                emit(q0, q1, q2, outward);
                emit(q0, q2, q3, outward);
            }
        }
    }

    mesh.densities.resize(mesh.vertices.size());
    for (std::size_t v = 0; v < mesh.vertices.size(); ++v)
        mesh.densities[v] = vertex_density(frame.to_unit(mesh.vertices[v]), unit, levels, depth);

    if (stats) {
        stats->solve_depth = depth;
        stats->unknowns = static_cast<std::size_t>(num_nodes);
        stats->cg_iterations = static_cast<int>(cg.iterations());
        stats->cg_error = cg.error();
        stats->iso_value = iso;
    }
    return mesh;
}

}  // namespace leafarea
