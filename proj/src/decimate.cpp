#include <algorithm>
#include <cmath>
#include <map>
#include <queue>

#include <Eigen/Dense>

#include "leafarea/mesh.hpp"

namespace leafarea {
namespace {

using Quadric = Eigen::Matrix4d;

// Constraint planes along open boundary edges, relative to face quadrics.
constexpr double kBoundaryWeight = 10.0;
// Share of non-manifold edges beyond which the input is rejected.
constexpr double kNonManifoldLimit = 0.05;

Quadric plane_quadric(const Vec3& n, const Vec3& on_plane, double weight) {
    const Eigen::Vector4d p(n.x(), n.y(), n.z(), -n.dot(on_plane));
    return weight * p * p.transpose();
}

double quadric_cost(const Quadric& q, const Vec3& v) {
    const Eigen::Vector4d h(v.x(), v.y(), v.z(), 1.0);
    return std::max(0.0, h.dot(q * h));
}

struct Candidate {
    double cost;
    int a, b;
    int version_a, version_b;
    Vec3 target;
    bool operator>(const Candidate& o) const {
        if (cost != o.cost) return cost > o.cost;
        if (a != o.a) return a > o.a;
        return b > o.b;
    }
};

class Decimator {
public:
    explicit Decimator(const TriangleMesh& mesh)
        : pos_(mesh.vertices),
          densities_(mesh.densities),
          tris_(mesh.triangles),
          tri_alive_(mesh.triangles.size(), 1),
          vertex_alive_(mesh.vertices.size(), 1),
          version_(mesh.vertices.size(), 0),
          incident_(mesh.vertices.size()),
          quadric_(mesh.vertices.size(), Quadric::Zero()),
          on_boundary_(mesh.vertices.size(), 0),
          alive_count_(static_cast<int>(mesh.triangles.size())) {
        for (int t = 0; t < static_cast<int>(tris_.size()); ++t)
            for (int v : tris_[t]) incident_[v].push_back(t);

        std::map<std::pair<int, int>, std::vector<int>> edge_tris;
        for (int t = 0; t < static_cast<int>(tris_.size()); ++t)
            for (int k = 0; k < 3; ++k) {
                const int a = tris_[t][k], b = tris_[t][(k + 1) % 3];
                edge_tris[{std::min(a, b), std::max(a, b)}].push_back(t);
            }

        for (int t = 0; t < static_cast<int>(tris_.size()); ++t) {
            const Vec3 n = face_normal(t);
            const double area = 0.5 * n.norm();
            if (area <= 0) continue;
            const Quadric k = plane_quadric(n.normalized(), pos_[tris_[t][0]], area);
            for (int v : tris_[t]) quadric_[v] += k;
        }

        std::size_t non_manifold = 0;
        for (const auto& [e, ts] : edge_tris) {
            if (ts.size() > 2) ++non_manifold;
            if (ts.size() != 1) continue;
            on_boundary_[e.first] = on_boundary_[e.second] = 1;
            const Vec3 fn = face_normal(ts[0]);
            const Vec3 edge = pos_[e.second] - pos_[e.first];
            const Vec3 cn = edge.cross(fn);
            if (cn.norm() <= 0) continue;
            const Quadric k =
                plane_quadric(cn.normalized(), pos_[e.first], kBoundaryWeight * edge.squaredNorm());
            quadric_[e.first] += k;
            quadric_[e.second] += k;
        }
        if (!edge_tris.empty() &&
            static_cast<double>(non_manifold) / edge_tris.size() > kNonManifoldLimit)
            fail(ErrorKind::Degenerate, "decimate_quadric: non-manifold input (" +
                                            std::to_string(non_manifold) + " edges)");

        for (const auto& [e, ts] : edge_tris) push(e.first, e.second);
    }

    void run(int target) {
        while (alive_count_ > target) {
            if (heap_.empty())
                fail(ErrorKind::Degenerate, "decimate_quadric: no valid collapse left at " +
                                                std::to_string(alive_count_) + " triangles");
            const Candidate c = heap_.top();
            heap_.pop();
            if (!vertex_alive_[c.a] || !vertex_alive_[c.b]) continue;
            if (version_[c.a] != c.version_a || version_[c.b] != c.version_b) continue;
            if (!collapse_allowed(c.a, c.b, c.target)) continue;
            collapse(c.a, c.b, c.target);
        }
    }

    TriangleMesh result() const {
        TriangleMesh out;
        std::vector<int> remap(pos_.size(), -1);
        for (std::size_t v = 0; v < pos_.size(); ++v) {
            if (!vertex_alive_[v] || incident_[v].empty()) continue;
            remap[v] = static_cast<int>(out.vertices.size());
            out.vertices.push_back(pos_[v]);
            if (!densities_.empty()) out.densities.push_back(densities_[v]);
        }
        for (std::size_t t = 0; t < tris_.size(); ++t)
            if (tri_alive_[t])
                out.triangles.push_back({remap[tris_[t][0]], remap[tris_[t][1]], remap[tris_[t][2]]});
        return out;
    }

private:
    Vec3 face_normal(int t) const {
        const Vec3& a = pos_[tris_[t][0]];
        return (pos_[tris_[t][1]] - a).cross(pos_[tris_[t][2]] - a);
    }

    std::vector<int> neighbors(int v) const {
        std::vector<int> out;
        for (int t : incident_[v])
            for (int w : tris_[t])
                if (w != v) out.push_back(w);
        std::sort(out.begin(), out.end());
        out.erase(std::unique(out.begin(), out.end()), out.end());
        return out;
    }

    std::vector<int> shared_triangles(int a, int b) const {
        std::vector<int> out;
        for (int t : incident_[a])
            if (tris_[t][0] == b || tris_[t][1] == b || tris_[t][2] == b) out.push_back(t);
        return out;
    }

    Vec3 optimal_position(const Quadric& q, int a, int b) const {
        const Eigen::Matrix3d A = q.topLeftCorner<3, 3>();
        const Vec3 rhs = -q.topRightCorner<3, 1>();
        Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(A);
        const auto& ev = es.eigenvalues();
        const Vec3 mid = 0.5 * (pos_[a] + pos_[b]);
        const double len = (pos_[b] - pos_[a]).norm();
        if (ev(2) > 0 && ev(0) > 1e-8 * ev(2)) {
            const Vec3 x = es.eigenvectors() *
                           (es.eigenvectors().transpose() * rhs).cwiseQuotient(ev);
            if ((x - mid).norm() <= 2.0 * len) return x;
        }
        // minimize along the edge: cost(t) = alpha t^2 + 2 beta t + const
        const Eigen::Vector4d p0(pos_[a].x(), pos_[a].y(), pos_[a].z(), 1.0);
        const Vec3 d3 = pos_[b] - pos_[a];
        const Eigen::Vector4d d(d3.x(), d3.y(), d3.z(), 0.0);
        const double alpha = d.dot(q * d), beta = d.dot(q * p0);
        double t = 0.5;
        if (alpha > 1e-300) t = std::clamp(-beta / alpha, 0.0, 1.0);
        return pos_[a] + t * d3;
    }

    void push(int a, int b) {
        if (a > b) std::swap(a, b);
        const Quadric q = quadric_[a] + quadric_[b];
        const Vec3 target = optimal_position(q, a, b);
        heap_.push({quadric_cost(q, target), a, b, version_[a], version_[b], target});
    }

    bool collapse_allowed(int a, int b, const Vec3& target) const {
        const std::vector<int> shared = shared_triangles(a, b);
        if (shared.empty() || shared.size() > 2) return false;
        // interior edge joining two boundary vertices would pinch the surface
        if (shared.size() == 2 && on_boundary_[a] && on_boundary_[b]) return false;

        // link condition: common neighbors are exactly the opposite vertices
        std::vector<int> opposite;
        for (int t : shared)
            for (int w : tris_[t])
                if (w != a && w != b) opposite.push_back(w);
        std::sort(opposite.begin(), opposite.end());
        const std::vector<int> na = neighbors(a), nb = neighbors(b);
        std::vector<int> common;
        std::set_intersection(na.begin(), na.end(), nb.begin(), nb.end(), std::back_inserter(common));
        if (common != opposite) return false;

        for (int v : {a, b})
            for (int t : incident_[v]) {
                if (std::find(shared.begin(), shared.end(), t) != shared.end()) continue;
                const Vec3 before = face_normal(t);
                std::array<Vec3, 3> p{pos_[tris_[t][0]], pos_[tris_[t][1]], pos_[tris_[t][2]]};
                for (int k = 0; k < 3; ++k)
                    if (tris_[t][k] == a || tris_[t][k] == b) p[k] = target;
                const Vec3 after = (p[1] - p[0]).cross(p[2] - p[0]);
                const double scale = before.norm();
                if (after.norm() <= 1e-12 * std::max(scale, 1e-300)) return false;
                if (before.dot(after) <= 0) return false;
            }
        return true;
    }

    void collapse(int a, int b, const Vec3& target) {
        for (int t : shared_triangles(a, b)) {
            tri_alive_[t] = 0;
            --alive_count_;
            for (int v : tris_[t]) {
                auto& inc = incident_[v];
                inc.erase(std::remove(inc.begin(), inc.end(), t), inc.end());
            }
        }
        for (int t : incident_[b]) {
            for (int& v : tris_[t])
                if (v == b) v = a;
            incident_[a].push_back(t);
        }
        incident_[b].clear();
        vertex_alive_[b] = 0;
        pos_[a] = target;
        quadric_[a] += quadric_[b];
        on_boundary_[a] = on_boundary_[a] || on_boundary_[b];
        if (!densities_.empty()) densities_[a] = std::max(densities_[a], densities_[b]);
        ++version_[a];
        for (int w : neighbors(a)) push(a, w);
    }

    std::vector<Vec3> pos_;
    std::vector<double> densities_;
    std::vector<Triangle> tris_;
    std::vector<char> tri_alive_;
    std::vector<char> vertex_alive_;
    std::vector<int> version_;
    std::vector<std::vector<int>> incident_;
    std::vector<Quadric> quadric_;
    std::vector<char> on_boundary_;
    int alive_count_;
    std::priority_queue<Candidate, std::vector<Candidate>, std::greater<Candidate>> heap_;
};

}  // namespace

TriangleMesh decimate_quadric(const TriangleMesh& mesh, int target_triangles) {
    require(target_triangles >= 4, "decimate_quadric: target must be >= 4");
    if (static_cast<int>(mesh.triangles.size()) <= target_triangles) return mesh;
    mesh.validate();
    Decimator d(mesh);
    d.run(target_triangles);
    return d.result();
}

}  // namespace leafarea
