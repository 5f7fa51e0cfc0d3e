#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <unordered_map>
#include <vector>

#include "leafarea/common.hpp"

namespace leafarea {

/// Integer lattice coordinate packed into one 64-bit key (21 bits per axis).
struct CellKey {
    static std::uint64_t pack(std::int64_t x, std::int64_t y, std::int64_t z) {
        constexpr std::int64_t bias = 1 << 20;
        constexpr std::uint64_t m = (1u << 21) - 1;
        return (static_cast<std::uint64_t>(x + bias) & m) |
               ((static_cast<std::uint64_t>(y + bias) & m) << 21) |
               ((static_cast<std::uint64_t>(z + bias) & m) << 42);
    }
};

/// Uniform hash grid; radius queries with radius <= cell size are exact when
/// scanning the 27 surrounding cells.
class VoxelGrid {
public:
    VoxelGrid(std::span<const Vec3> points, double cell);

    /// Indices j with |p_j - p| <= radius, in ascending index order.
    void radius_query(const Vec3& p, double radius, std::vector<int>& out) const;

private:
    std::array<std::int64_t, 3> cell_of(const Vec3& p) const;

    std::span<const Vec3> points_;
    double cell_;
    Vec3 origin_;
    std::unordered_map<std::uint64_t, std::vector<int>> cells_;
};

/// Static 3-d tree for k-nearest-neighbor queries.
class KdTree {
public:
    explicit KdTree(std::span<const Vec3> points);

    /// The k nearest indices (including a query point that belongs to the set),
    /// nearest first; ties broken by lower index.
    std::vector<int> knn(const Vec3& q, int k) const;

private:
    struct Node {
        int begin, end;    // range in order_
        int axis = -1;     // -1 for leaves
        double split = 0;
        int left = -1, right = -1;
    };
    int build(int begin, int end);

    std::span<const Vec3> points_;
    std::vector<int> order_;
    std::vector<Node> nodes_;
};

}  // namespace leafarea
