#include "doctest.h"

#include <algorithm>
#include <numeric>
#include <random>
#include <set>

#include "leafarea/cloud.hpp"
#include "leafarea/spatial.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace leafarea;

namespace {

RgbdFrame flat_frame(int w, int h, std::uint16_t raw) {
    RgbdFrame f;
    f.intrinsics = testsupport::small_camera(w, h);
    f.depth = DepthRaster(w, h, raw);
    f.color = ColorRaster(w, h, Rgb{1, 2, 3});
    f.depth_scale = 0.001;
    return f;
}

std::vector<Vec3> blob(std::mt19937& rng, const Vec3& center, int n, double spread) {
    std::uniform_real_distribution<double> u(-spread, spread);
    std::vector<Vec3> pts;
    for (int i = 0; i < n; ++i) pts.push_back(center + Vec3(u(rng), u(rng), u(rng)));
    return pts;
}

std::set<std::vector<double>> as_set(const PointCloud& c) {
    std::set<std::vector<double>> s;
    for (const Vec3& p : c.points) s.insert({p.x(), p.y(), p.z()});
    return s;
}

}  // namespace

TEST_CASE("backprojection follows the pinhole model") {
    RgbdFrame f = flat_frame(64, 48, 1000);
    Mask m(64, 48, 0);
    m(32, 24) = 1;   // principal point
    m(42, 24) = 1;   // cx + 10 px at fx = 100
    const PointCloud c = backproject_masked(f, m);
    REQUIRE(c.size() == 2);
    CHECK((c.points[0] - Vec3(0, 0, 1.0)).norm() < 1e-12);
    CHECK((c.points[1] - Vec3(0.1, 0, 1.0)).norm() < 1e-12);
    CHECK(c.colors[0] == Rgb{1, 2, 3});

    // with fx equal to the offset the point lands at x = z
    f.intrinsics.fx = 10;
    const PointCloud c2 = backproject_masked(f, m);
    CHECK((c2.points[1] - Vec3(1.0, 0, 1.0)).norm() < 1e-12);
}

TEST_CASE("backprojection drops zero-depth pixels") {
    RgbdFrame f = flat_frame(20, 20, 800);
    Mask m(20, 20, 0);
    for (int v = 2; v < 12; ++v)
        for (int u = 3; u < 9; ++u) m(u, v) = 1;
    for (int i = 0; i < 7; ++i) f.depth(3 + i % 6, 2 + i) = 0;
    CHECK(backproject_masked(f, m).size() == 60 - 7);
}

TEST_CASE("backprojection errors") {
    const RgbdFrame f = flat_frame(10, 10, 0);
    Mask m(10, 10, 1);
    try {
        backproject_masked(f, m);
        FAIL("expected an error");
    } catch (const Error& e) {
        CHECK(std::string(e.what()) == "no valid masked pixels");
    }
    CHECK_THROWS_AS(backproject_masked(flat_frame(10, 10, 5), Mask(9, 10, 1)), Error);
}

TEST_CASE("projecting back-projected points recovers the pixel centers") {
    std::mt19937 rng(1);
    std::uniform_int_distribution<int> raw(300, 4000);
    RgbdFrame f = flat_frame(40, 30, 0);
    for (auto& px : f.depth.data()) px = static_cast<std::uint16_t>(raw(rng));
    const PointCloud c = backproject_masked(f, Mask(40, 30, 1));
    for (std::size_t i = 0; i < c.size(); ++i) {
        const Eigen::Vector2d uv = f.intrinsics.project(c.points[i]);
        CHECK(std::abs(uv.x() - c.pixels[i].u) < 0.5);
        CHECK(std::abs(uv.y() - c.pixels[i].v) < 0.5);
    }
}

TEST_CASE("DBSCAN defaults") {
    const DbscanParams p;
    CHECK(p.eps == 0.01);
    CHECK(p.min_pts == 30);
}

TEST_CASE("two separated blobs form two clusters that match the brute-force oracle") {
    std::mt19937 rng(4);
    auto a = blob(rng, {0, 0, 1}, 200, 0.01);
    auto b = blob(rng, {1, 0, 1}, 200, 0.01);
    a.insert(a.end(), b.begin(), b.end());
    const auto labels = dbscan(a, {0.01, 30});
    CHECK(*std::max_element(labels.begin(), labels.end()) == 1);
    CHECK(oracle::same_partition(labels, oracle::dbscan(a, 0.01, 30)));
}

TEST_CASE("a tight group of 50 points is one cluster") {
    std::mt19937 rng(5);
    PointCloud c;
    c.points = blob(rng, {0.2, 0.1, 0.9}, 50, 0.0028);  // all within eps/2 of the center
    const PointCloud out = cluster_filter(c, {});
    CHECK(out.size() == 50);
}

TEST_CASE("an isolated point is noise and removed") {
    std::mt19937 rng(6);
    PointCloud c;
    c.points = blob(rng, {0, 0, 1}, 100, 0.004);
    c.points.push_back({0, 0, 2});
    const auto labels = dbscan(c.points, {});
    CHECK(labels.back() == kNoise);
    const PointCloud out = cluster_filter(c, {});
    CHECK(out.size() == 100);
    CHECK(as_set(out).count({0, 0, 2}) == 0);
}

TEST_CASE("cluster_filter keeps the larger cluster, the first on ties") {
    std::mt19937 rng(7);
    PointCloud c;
    c.points = blob(rng, {0, 0, 1}, 60, 0.003);
    auto big = blob(rng, {0.5, 0, 1}, 90, 0.003);
    c.points.insert(c.points.end(), big.begin(), big.end());
    CHECK(cluster_filter(c, {}).size() == 90);

    PointCloud tie;
    tie.points = blob(rng, {0, 0, 1}, 40, 0.003);
    auto second = blob(rng, {0.5, 0, 1}, 40, 0.003);
    tie.points.insert(tie.points.end(), second.begin(), second.end());
    const PointCloud out = cluster_filter(tie, {});
    REQUIRE(out.size() == 40);
    CHECK(out.points.front().x() < 0.25);
}

TEST_CASE("cluster_filter fails when everything is noise") {
    PointCloud c;
    for (int i = 0; i < 20; ++i) c.points.push_back({0.1 * i, 0, 1});
    CHECK_THROWS_AS(cluster_filter(c, {}), Error);
}

TEST_CASE("DBSCAN equals the O(n^2) reference on random configurations") {
    std::mt19937 rng(99);
    for (int t = 0; t < 40; ++t) {
        std::uniform_int_distribution<int> nblobs(1, 4), npts(5, 80);
        std::vector<Vec3> pts;
        const int nb = nblobs(rng);
        for (int b = 0; b < nb; ++b) {
            std::uniform_real_distribution<double> cpos(-0.05, 0.05);
            auto p = blob(rng, {cpos(rng), cpos(rng), 1 + cpos(rng)}, npts(rng), 0.01 + 0.01 * (t % 3));
            pts.insert(pts.end(), p.begin(), p.end());
        }
        const DbscanParams params{0.004 + 0.002 * (t % 4), 1 + t % 12};
        CHECK(oracle::same_partition(dbscan(pts, params), oracle::dbscan(pts, params.eps, params.min_pts)));
    }
}

TEST_CASE("cluster_filter output is invariant under input permutation") {
    std::mt19937 rng(8);
    PointCloud c;
    c.points = blob(rng, {0, 0, 1}, 150, 0.008);
    auto other = blob(rng, {0.3, 0, 1}, 60, 0.008);
    c.points.insert(c.points.end(), other.begin(), other.end());
    const auto ref = as_set(cluster_filter(c, {}));
    for (int t = 0; t < 5; ++t) {
        std::vector<int> idx(c.size());
        std::iota(idx.begin(), idx.end(), 0);
        std::shuffle(idx.begin(), idx.end(), rng);
        const PointCloud out = cluster_filter(c.select(idx), {});
        CHECK(out.size() >= 30);
        CHECK(as_set(out) == ref);
    }
}

TEST_CASE("normals of a plane face the camera") {
    std::mt19937 rng(9);
    std::uniform_real_distribution<double> u(-0.1, 0.1);
    PointCloud c;
    for (int i = 0; i < 500; ++i) c.points.push_back({u(rng), u(rng), 1.0});
    const PointCloud out = estimate_oriented_normals(c, 30);
    for (const Vec3& n : out.normals) {
        CHECK((n - Vec3(0, 0, -1)).norm() < 1e-3);
        CHECK(std::abs(n.norm() - 1) < 1e-6);
    }
}

TEST_CASE("normals on a sphere follow the radial direction on the visible side") {
    std::mt19937 rng(10);
    std::normal_distribution<double> g;
    const Vec3 center(0, 0, 1);
    PointCloud c;
    for (int i = 0; i < 4000; ++i) c.points.push_back(center + 0.1 * Vec3(g(rng), g(rng), g(rng)).normalized());
    const PointCloud out = estimate_oriented_normals(c, 30);
    const double cos5 = std::cos(5 * M_PI / 180);
    for (std::size_t i = 0; i < out.size(); ++i) {
        const Vec3& p = out.points[i];
        const Vec3& n = out.normals[i];
        CHECK(n.dot(p) <= 0);
        CHECK(std::abs(n.dot((p - center).normalized())) >= cos5);
        if ((p - center).dot(p) < -0.05 * p.norm()) CHECK(n.dot((p - center).normalized()) >= cos5);
    }
}

TEST_CASE("normal estimation errors") {
    PointCloud same;
    same.points.assign(40, Vec3(0, 0, 1));
    CHECK_THROWS_AS(estimate_oriented_normals(same, 30), Error);
    PointCloud few;
    few.points = {{0, 0, 1}, {0.1, 0, 1}};
    CHECK_THROWS_AS(estimate_oriented_normals(few, 30), Error);
}

TEST_CASE("kd-tree knn matches a sorted scan") {
    std::mt19937 rng(12);
    std::uniform_real_distribution<double> u(0, 1);
    std::vector<Vec3> pts;
    for (int i = 0; i < 400; ++i) pts.push_back({u(rng), u(rng), u(rng)});
    const KdTree tree(pts);
    for (int q = 0; q < 30; ++q) {
        const Vec3 p(u(rng), u(rng), u(rng));
        std::vector<int> idx(pts.size());
        std::iota(idx.begin(), idx.end(), 0);
        std::stable_sort(idx.begin(), idx.end(),
                         [&](int a, int b) { return (pts[a] - p).squaredNorm() < (pts[b] - p).squaredNorm(); });
        idx.resize(12);
        CHECK(tree.knn(p, 12) == idx);
    }
}
