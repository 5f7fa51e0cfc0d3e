#include "leafarea/spatial.hpp"

#include <algorithm>
#include <cmath>
#include <queue>

namespace leafarea {

VoxelGrid::VoxelGrid(std::span<const Vec3> points, double cell)
    : points_(points), cell_(cell), origin_(Vec3::Zero()) {
    require(cell > 0, "voxel grid: cell size must be positive");
    if (!points.empty()) {
        origin_ = points[0];
        for (const Vec3& p : points) origin_ = origin_.cwiseMin(p);
    }
    for (int i = 0; i < static_cast<int>(points.size()); ++i) {
        const auto c = cell_of(points[i]);
        cells_[CellKey::pack(c[0], c[1], c[2])].push_back(i);
    }
}

std::array<std::int64_t, 3> VoxelGrid::cell_of(const Vec3& p) const {
    const Vec3 r = (p - origin_) / cell_;
    return {static_cast<std::int64_t>(std::floor(r.x())), static_cast<std::int64_t>(std::floor(r.y())),
            static_cast<std::int64_t>(std::floor(r.z()))};
}

void VoxelGrid::radius_query(const Vec3& p, double radius, std::vector<int>& out) const {
    out.clear();
    const auto c = cell_of(p);
    const std::int64_t reach = static_cast<std::int64_t>(std::ceil(radius / cell_));
    const double r2 = radius * radius;
    for (std::int64_t dz = -reach; dz <= reach; ++dz)
        for (std::int64_t dy = -reach; dy <= reach; ++dy)
            for (std::int64_t dx = -reach; dx <= reach; ++dx) {
                auto it = cells_.find(CellKey::pack(c[0] + dx, c[1] + dy, c[2] + dz));
                if (it == cells_.end()) continue;
                for (int j : it->second)
                    if ((points_[j] - p).squaredNorm() <= r2) out.push_back(j);
            }
    std::sort(out.begin(), out.end());
}

KdTree::KdTree(std::span<const Vec3> points) : points_(points) {
    order_.resize(points.size());
    for (int i = 0; i < static_cast<int>(points.size()); ++i) order_[i] = i;
    if (!points.empty()) build(0, static_cast<int>(points.size()));
}

int KdTree::build(int begin, int end) {
    const int id = static_cast<int>(nodes_.size());
    nodes_.push_back({begin, end});
    if (end - begin <= 16) return id;

    Vec3 lo = points_[order_[begin]], hi = lo;
    for (int i = begin; i < end; ++i) {
        lo = lo.cwiseMin(points_[order_[i]]);
        hi = hi.cwiseMax(points_[order_[i]]);
    }
    int axis = 0;
    (hi - lo).maxCoeff(&axis);
    if (hi[axis] - lo[axis] <= 0) return id;  // all coincident

    const int mid = (begin + end) / 2;
    std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end,
                     [&](int a, int b) { return points_[a][axis] < points_[b][axis]; });
    const double split = points_[order_[mid]][axis];
    const int left = build(begin, mid);
    const int right = build(mid, end);
    nodes_[id].axis = axis;
    nodes_[id].split = split;
    nodes_[id].left = left;
    nodes_[id].right = right;
    return id;
}

std::vector<int> KdTree::knn(const Vec3& q, int k) const {
    using Entry = std::pair<double, int>;  // (squared distance, index)
    std::priority_queue<Entry> best;       // max-heap of the current k best
    if (k <= 0 || nodes_.empty()) return {};

    auto visit = [&](auto&& self, int node_id) -> void {
        const Node& n = nodes_[node_id];
        if (n.axis < 0) {
            for (int i = n.begin; i < n.end; ++i) {
                const int j = order_[i];
                const Entry e{(points_[j] - q).squaredNorm(), j};
                if (static_cast<int>(best.size()) < k) {
                    best.push(e);
                } else if (e < best.top()) {
                    best.pop();
                    best.push(e);
                }
            }
            return;
        }
        const double diff = q[n.axis] - n.split;
        const int near = diff < 0 ? n.left : n.right;
        const int far = diff < 0 ? n.right : n.left;
        self(self, near);
        if (static_cast<int>(best.size()) < k || diff * diff <= best.top().first) self(self, far);
    };
    visit(visit, 0);

    std::vector<int> out(best.size());
    for (int i = static_cast<int>(best.size()) - 1; i >= 0; --i) {
        out[i] = best.top().second;
        best.pop();
    }
    return out;
}

}  // namespace leafarea
