#include "doctest.h"

#include <Eigen/Geometry>

#include "leafarea/synthetic.hpp"
#include "support.hpp"

using namespace leafarea;

namespace {

Pose tilted(double deg) {
    Pose p;
    p.rotation = Eigen::AngleAxisd(deg * M_PI / 180, Vec3::UnitX()).toRotationMatrix();
    return p;
}

}  // namespace

TEST_CASE("analytic areas") {
    CHECK(make_leaf_surface(PlanarEllipse{6, 3}).analytic_area_cm2 == doctest::Approx(56.5487).epsilon(1e-6));
    CHECK(make_leaf_surface(CylindricalPatch{10, M_PI / 3, 8}).analytic_area_cm2 ==
          doctest::Approx(83.776).epsilon(1e-5));
    CHECK(make_leaf_surface(PlanarEllipse{6, 3}, tilted(30)).analytic_area_cm2 ==
          make_leaf_surface(PlanarEllipse{6, 3}).analytic_area_cm2);
    CHECK_THROWS_AS(make_leaf_surface(PlanarEllipse{0, 3}), Error);
    CHECK_THROWS_AS(make_leaf_surface(PlanarEllipse{2, -1}), Error);
    CHECK_THROWS_AS(make_leaf_surface(CylindricalPatch{10, 0, 8}), Error);
    CHECK_THROWS_AS(make_leaf_surface(CylindricalPatch{0, 1, 8}), Error);
    CHECK(std::string(shape_name(PlanarEllipse{1, 1})) != shape_name(CylindricalPatch{1, 1, 1}));
}

TEST_CASE("ray intersection with the placed surfaces") {
    Pose p;
    p.translation = {0, 0, 1};
    const LeafSurface e = make_leaf_surface(PlanarEllipse{6, 3}, p);
    CHECK(*e.intersect(Vec3::Zero(), {0, 0, 1}) == doctest::Approx(1.0));
    CHECK(*e.intersect(Vec3::Zero(), Vec3(0.059, 0, 1)) == doctest::Approx(1.0));
    CHECK_FALSE(e.intersect(Vec3::Zero(), Vec3(0.061, 0, 1)).has_value());
    CHECK_FALSE(e.intersect(Vec3::Zero(), Vec3(0, 0.031, 1)).has_value());

    const LeafSurface c = make_leaf_surface(CylindricalPatch{10, M_PI / 3, 8}, p);
    CHECK(*c.intersect(Vec3::Zero(), {0, 0, 1}) == doctest::Approx(1.0));
    // the edges curl towards the camera: off-axis hits are nearer than the vertex plane
    const auto off = c.intersect(Vec3::Zero(), Vec3(0.04, 0, 1).normalized());
    REQUIRE(off.has_value());
    CHECK(*off * Vec3(0.04, 0, 1).normalized().z() < 1.0);
}

TEST_CASE("fronto-parallel ellipse footprint matches the analytic area") {
    const CameraIntrinsics k = default_synthetic_intrinsics();
    const SyntheticFrame s = render_rgbd(make_leaf_surface(PlanarEllipse{6, 3}), k, 1.0, NoiseSpec::none());
    const double footprint_cm2 = count_set(s.mask) * (1.0 / k.fx) * (1.0 / k.fy) * 1e4;
    CHECK(footprint_cm2 == doctest::Approx(56.5487).epsilon(0.01));
    CHECK(s.area_cm2 == doctest::Approx(56.5487).epsilon(1e-6));
    CHECK(s.frame.depth_scale == 0.001);
    s.frame.validate();

    for (int v = 0; v < k.height; ++v)
        for (int u = 0; u < k.width; ++u) {
            if (s.mask(u, v)) {
                CHECK(s.frame.depth(u, v) == 1000);
                CHECK(s.frame.color(u, v).g > s.frame.color(u, v).r);
            } else {
                CHECK(s.frame.depth(u, v) == 1500);  // background plane
            }
        }
}

TEST_CASE("mask is exactly the set of pixel-center rays that hit the leaf") {
    const CameraIntrinsics k = default_synthetic_intrinsics();
    Pose p = tilted(25);
    p.translation = {0.01, -0.005, 0};
    const LeafSurface leaf = make_leaf_surface(CylindricalPatch{6, 1.2, 7}, p);
    const SyntheticFrame s = render_rgbd(leaf, k, 0.8, NoiseSpec::none());
    LeafSurface placed = leaf;
    placed.pose.translation.z() += 0.8;
    for (int v = 0; v < k.height; v += 3)
        for (int u = 0; u < k.width; u += 3) {
            const Vec3 dir((u - k.cx) / k.fx, (v - k.cy) / k.fy, 1);
            const auto hit = placed.intersect(Vec3::Zero(), dir);
            CHECK(static_cast<bool>(s.mask(u, v)) == hit.has_value());
            if (hit) CHECK(s.frame.depth(u, v) == std::lround(*hit / 0.001));
        }
}

TEST_CASE("tilting foreshortens the silhouette but not the area") {
    const CameraIntrinsics k = default_synthetic_intrinsics();
    const LeafSurface flat = make_leaf_surface(PlanarEllipse{6, 3});
    const LeafSurface tilt = make_leaf_surface(PlanarEllipse{6, 3}, tilted(30));
    const auto a = render_rgbd(flat, k, 1.0, NoiseSpec::none());
    const auto b = render_rgbd(tilt, k, 1.0, NoiseSpec::none());
    CHECK(double(count_set(b.mask)) / count_set(a.mask) == doctest::Approx(std::cos(M_PI / 6)).epsilon(0.02));
    CHECK(a.area_cm2 == b.area_cm2);
}

TEST_CASE("distance sweep endpoints render") {
    const CameraIntrinsics k = default_synthetic_intrinsics();
    const LeafSurface big = make_leaf_surface(PlanarEllipse{8, 6}, tilted(35));
    for (double d : {0.5, 2.5}) {
        const auto s = render_rgbd(big, k, d, NoiseSpec{});
        CHECK(count_set(s.mask) > 0);
        CHECK(s.outline.size() >= 3);
    }
    CHECK_THROWS_AS(render_rgbd(big, k, 0.05, NoiseSpec::none()), Error);
}

TEST_CASE("corrupt_depth") {
    SUBCASE("zero noise is the identity") {
        DepthRaster r(9, 7);
        for (std::size_t i = 0; i < r.size(); ++i) r.data()[i] = static_cast<std::uint16_t>(997 + 13 * i);
        CHECK(corrupt_depth(r, NoiseSpec::none()) == r);
    }
    SUBCASE("quantization rounds to the nearest multiple") {
        const DepthRaster r(1, 4, std::vector<std::uint16_t>{1001, 1002, 1003, 0});
        const DepthRaster q = corrupt_depth(r, {4, 0.0, 0});
        CHECK(q(0, 0) == 1000);
        CHECK(q(0, 1) == 1004);  // halfway rounds up
        CHECK(q(0, 2) == 1004);
        CHECK(q(0, 3) == 0);
    }
    SUBCASE("impulse count follows the binomial law") {
        const DepthRaster r(1000, 1000, 1234);
        const DepthRaster out = corrupt_depth(r, {0, 0.01, 77});
        std::size_t zeros = 0, highs = 0, other = 0;
        for (auto px : out.data()) {
            if (px == 0) ++zeros;
            else if (px == 65535) ++highs;
            else if (px != 1234) ++other;
        }
        const double n = 1e6, p = 0.01, sigma = std::sqrt(n * p * (1 - p));
        CHECK(std::abs(double(zeros + highs) - n * p) <= 3 * sigma);
        const double half_sigma = std::sqrt(n * p / 2 * (1 - p / 2));
        CHECK(std::abs(double(zeros) - n * p / 2) <= 3 * half_sigma);
        CHECK(other == 0);
    }
    SUBCASE("deterministic per seed") {
        const DepthRaster r(200, 100, 900);
        CHECK(corrupt_depth(r, {4, 0.05, 5}) == corrupt_depth(r, {4, 0.05, 5}));
        CHECK_FALSE(corrupt_depth(r, {4, 0.05, 5}) == corrupt_depth(r, {4, 0.05, 6}));
    }
    SUBCASE("invalid specs") {
        CHECK_THROWS_AS(corrupt_depth(DepthRaster(2, 2), {-1, 0.0, 0}), Error);
        CHECK_THROWS_AS(corrupt_depth(DepthRaster(2, 2), {0, 1.5, 0}), Error);
    }
}

TEST_CASE("parse_distances") {
    CHECK(parse_distances("0.5:2.5:0.5") == std::vector<double>{0.5, 1.0, 1.5, 2.0, 2.5});
    CHECK(parse_distances("1,2.5") == std::vector<double>{1.0, 2.5});
    CHECK_THROWS_AS(parse_distances("1:2"), Error);
    CHECK_THROWS_AS(parse_distances("a,b"), Error);
    CHECK_THROWS_AS(parse_distances("2:1:0.5"), Error);
}

TEST_CASE("leaf plan") {
    SynthConfig cfg;
    const auto plan = plan_synthetic_leaves(cfg);
    REQUIRE(plan.size() == 30);
    std::size_t ellipses = 0;
    for (std::size_t i = 0; i < plan.size(); ++i) {
        CHECK(plan[i].distance_m == cfg.distances[i % cfg.distances.size()]);
        CHECK(plan[i].surface.analytic_area_cm2 >= 20 - 1e-9);
        CHECK(plan[i].surface.analytic_area_cm2 <= 150 + 1e-9);
        ellipses += std::holds_alternative<PlanarEllipse>(plan[i].surface.shape);
    }
    CHECK(ellipses == 15);

    const auto again = plan_synthetic_leaves(cfg);
    for (std::size_t i = 0; i < plan.size(); ++i)
        CHECK(again[i].surface.analytic_area_cm2 == plan[i].surface.analytic_area_cm2);

    cfg.planar_only = true;
    for (const auto& leaf : plan_synthetic_leaves(cfg)) CHECK(std::holds_alternative<PlanarEllipse>(leaf.surface.shape));
}

TEST_CASE("generated datasets are byte-identical for the same seed") {
    testsupport::TempDir a("synth_a"), b("synth_b");
    SynthConfig cfg;
    cfg.count = 3;
    generate_dataset(cfg, a.path());
    generate_dataset(cfg, b.path());
    for (const char* f : {"annotations.json", "depth/000001.png", "color/000002.png", "depth/000003.png"})
        CHECK(testsupport::slurp(a / f) == testsupport::slurp(b / f));
}
