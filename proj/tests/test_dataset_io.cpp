#include "doctest.h"

#include <algorithm>
#include <set>

#include "json.hpp"
#include "leafarea/dataset_io.hpp"
#include "leafarea/image_io.hpp"
#include "leafarea/synthetic.hpp"
#include "support.hpp"

using namespace leafarea;
using nlohmann::json;
using testsupport::TempDir;

namespace {

// Writes n blank frames and returns an annotation skeleton referencing them.
json make_frames(const TempDir& dir, int n, int w = 32, int h = 24) {
    std::filesystem::create_directories(dir / "c");
    std::filesystem::create_directories(dir / "d");
    json doc;
    doc["images"] = json::array();
    for (int i = 1; i <= n; ++i) {
        const std::string name = std::to_string(i) + ".png";
        write_color_png(dir / ("c/" + name), ColorRaster(w, h, Rgb{10, 200, 10}));
        write_depth_png(dir / ("d/" + name), DepthRaster(w, h, 1000));
        doc["images"].push_back({{"id", i},
                                 {"file_name", "c/" + name},
                                 {"depth_file_name", "d/" + name},
                                 {"depth_scale", 0.001},
                                 {"intrinsics", {{"fx", 50.0}, {"fy", 50.0}, {"cx", w / 2.0}, {"cy", h / 2.0}}}});
    }
    doc["annotations"] = json::array();
    return doc;
}

json square(int id, int image_id, double x0, double y0, double s) {
    return {{"id", id}, {"image_id", image_id}, {"segmentation", {{x0, y0, x0 + s, y0, x0 + s, y0 + s, x0, y0 + s}}}};
}

std::filesystem::path write_doc(const TempDir& dir, const json& doc) {
    const auto p = dir / "ann.json";
    testsupport::spit(p, doc.dump());
    return p;
}

ErrorKind kind_of_load(const std::filesystem::path& p) {
    try {
        load_dataset(p);
    } catch (const Error& e) {
        return e.kind();
    }
    FAIL("load_dataset did not throw");
    return ErrorKind::Numeric;
}

Dataset bare_dataset(int n_images) {
    Dataset ds;
    for (int i = 0; i < n_images; ++i) {
        FrameDescriptor fd;
        fd.image_id = 100 + i;
        ds.frames[fd.image_id] = fd;
        AnnotatedInstance a;
        a.image_id = fd.image_id;
        a.instance_id = i;
        ds.instances.push_back(a);
        a.instance_id = 1000 + i;
        ds.instances.push_back(a);
    }
    return ds;
}

}  // namespace

TEST_CASE("rasterize samples pixel centers with even-odd fill") {
    // square [2,6]x[1,4] covers centers u+0.5 in {2..5}, v+0.5 in {1..3}
    const Mask m = rasterize_polygons({{{2, 1}, {6, 1}, {6, 4}, {2, 4}}}, 10, 8);
    CHECK(count_set(m) == 12);
    CHECK(m(2, 1));
    CHECK(m(5, 3));
    CHECK_FALSE(m(6, 1));
    CHECK_FALSE(m(1, 1));

    // a second polygon inside the first does not punch a hole: polygons are OR-ed
    const Mask two = rasterize_polygons({{{0, 0}, {8, 0}, {8, 8}, {0, 8}}, {{2, 2}, {4, 2}, {4, 4}, {2, 4}}}, 8, 8);
    CHECK(count_set(two) == 64);

    // self-overlapping star: even-odd leaves the pentagon core empty
    std::vector<Eigen::Vector2d> star;
    for (int i = 0; i < 5; ++i) {
        const double t = -M_PI / 2 + i * 4 * M_PI / 5;
        star.emplace_back(50 + 40 * std::cos(t), 50 + 40 * std::sin(t));
    }
    const Mask s = rasterize_polygons({star}, 100, 100);
    CHECK_FALSE(s(50, 50));
    CHECK(s(50, 15));
}

TEST_CASE("load_dataset parses frames, polygons and areas") {
    TempDir dir("ds_ok");
    json doc = make_frames(dir, 1);
    json a = square(7, 1, 4, 4, 6);
    a["leaf_area_cm2"] = 12.5;
    doc["annotations"].push_back(a);
    doc["annotations"].push_back(square(8, 1, 12, 4, 4));  // no area field
    const Dataset ds = load_dataset(write_doc(dir, doc));
    REQUIRE(ds.frames.size() == 1);
    REQUIRE(ds.instances.size() == 2);
    CHECK(ds.instances[0].gt_area_cm2 == 12.5);
    CHECK(ds.instances[1].gt_area_cm2 == -1.0);
    CHECK_FALSE(ds.instances[1].has_gt_area());
    CHECK(count_set(ds.instances[0].bitmask) == 36);
    CHECK(ds.frame(1).depth_scale == 0.001);
    CHECK(ds.frame(1).intrinsics.fx == 50.0);

    const RgbdFrame f = ds.load_frame(1);
    CHECK(f.depth(3, 3) == 1000);
    CHECK(f.color(0, 0) == Rgb{10, 200, 10});
}

TEST_CASE("empty annotation list gives a frame and no instances") {
    TempDir dir("ds_empty");
    const Dataset ds = load_dataset(write_doc(dir, make_frames(dir, 1)));
    CHECK(ds.frames.size() == 1);
    CHECK(ds.instances.empty());
}

TEST_CASE("load_dataset rejects bad inputs") {
    TempDir dir("ds_bad");

    SUBCASE("two-vertex polygon among many") {
        json doc = make_frames(dir, 5);
        int id = 0;
        for (int img = 1; img <= 5; ++img)
            for (int j = 0; j < (img <= 2 ? 3 : 2); ++j) doc["annotations"].push_back(square(++id, img, 2 + 5 * j, 2, 4));
        REQUIRE(doc["annotations"].size() == 12);
        doc["annotations"][5]["segmentation"] = {{1.0, 1.0, 5.0, 5.0}};
        try {
            load_dataset(write_doc(dir, doc));
            FAIL("expected an error");
        } catch (const Error& e) {
            CHECK(std::string(e.what()).find("degenerate polygon") != std::string::npos);
        }
    }
    SUBCASE("missing depth_scale") {
        json doc = make_frames(dir, 1);
        doc["images"][0].erase("depth_scale");
        CHECK(kind_of_load(write_doc(dir, doc)) == ErrorKind::Format);
    }
    SUBCASE("non-positive depth_scale") {
        json doc = make_frames(dir, 1);
        doc["images"][0]["depth_scale"] = 0.0;
        CHECK(kind_of_load(write_doc(dir, doc)) == ErrorKind::Format);
    }
    SUBCASE("missing image file") {
        json doc = make_frames(dir, 1);
        std::filesystem::remove(dir / "d/1.png");
        CHECK(kind_of_load(write_doc(dir, doc)) == ErrorKind::Io);
    }
    SUBCASE("depth and color sizes differ") {
        json doc = make_frames(dir, 1);
        write_depth_png(dir / "d/1.png", DepthRaster(10, 10, 1));
        CHECK(kind_of_load(write_doc(dir, doc)) == ErrorKind::Format);
    }
    SUBCASE("malformed JSON") {
        testsupport::spit(dir / "ann.json", "{\"images\": [");
        CHECK(kind_of_load(dir / "ann.json") == ErrorKind::Format);
    }
    SUBCASE("annotation referencing an unknown image") {
        json doc = make_frames(dir, 1);
        doc["annotations"].push_back(square(1, 99, 2, 2, 4));
        CHECK(kind_of_load(write_doc(dir, doc)) == ErrorKind::Format);
    }
    SUBCASE("wrong value type") {
        json doc = make_frames(dir, 1);
        json a = square(1, 1, 2, 2, 4);
        a["image_id"] = "one";
        doc["annotations"].push_back(a);
        CHECK(kind_of_load(write_doc(dir, doc)) == ErrorKind::Format);
    }
}

TEST_CASE("kfold_split sizes") {
    SUBCASE("100 images, k=5") {
        const auto folds = kfold_split(bare_dataset(100), 5, 1);
        REQUIRE(folds.size() == 5);
        for (const Fold& f : folds) {
            CHECK(f.val.frames.size() == 20);
            CHECK(f.train.frames.size() == 80);
        }
    }
    SUBCASE("7 images, k=5 gives {2,2,1,1,1}") {
        const auto folds = kfold_split(bare_dataset(7), 5, 3);
        std::vector<std::size_t> sizes;
        for (const Fold& f : folds) sizes.push_back(f.val.frames.size());
        CHECK(sizes == std::vector<std::size_t>{2, 2, 1, 1, 1});
    }
    SUBCASE("k larger than the image count") {
        CHECK_THROWS_AS(kfold_split(bare_dataset(3), 4, 0), Error);
        CHECK_THROWS_AS(kfold_split(bare_dataset(3), 1, 0), Error);
    }
}

TEST_CASE("kfold_split partitions images and keeps instances with their image") {
    for (int n : {2, 5, 9, 23})
        for (int k = 2; k <= n; k += 3)
            for (std::uint64_t seed : {0ull, 7ull, 123456789ull}) {
                const Dataset ds = bare_dataset(n);
                const auto folds = kfold_split(ds, k, seed);
                std::multiset<std::int64_t> seen;
                for (const Fold& f : folds) {
                    for (const auto& [id, fd] : f.val.frames) {
                        seen.insert(id);
                        CHECK(f.train.frames.count(id) == 0);
                    }
                    CHECK(f.val.frames.size() + f.train.frames.size() == ds.frames.size());
                    for (const AnnotatedInstance& inst : f.val.instances) CHECK(f.val.frames.count(inst.image_id) == 1);
                    CHECK(f.val.instances.size() == 2 * f.val.frames.size());
                    CHECK(f.val.split == SplitTag::Val);
                }
                CHECK(seen.size() == ds.frames.size());
                CHECK(std::set<std::int64_t>(seen.begin(), seen.end()).size() == ds.frames.size());
            }
}

TEST_CASE("kfold_split is deterministic per seed") {
    const Dataset ds = bare_dataset(30);
    auto ids = [](const std::vector<Fold>& folds) {
        std::vector<std::vector<std::int64_t>> out;
        for (const Fold& f : folds) {
            out.emplace_back();
            for (const auto& [id, fd] : f.val.frames) out.back().push_back(id);
        }
        return out;
    };
    CHECK(ids(kfold_split(ds, 5, 42)) == ids(kfold_split(ds, 5, 42)));
    CHECK(ids(kfold_split(ds, 5, 42)) != ids(kfold_split(ds, 5, 43)));
}

TEST_CASE("results CSV format") {
    TempDir dir("csv");
    SUBCASE("zero rows") {
        write_results({}, dir / "r.csv");
        CHECK(testsupport::slurp(dir / "r.csv") == std::string(kResultsHeader) + "\n");
    }
    SUBCASE("gt placeholder is written as -1.0") {
        ResultRow r;
        r.image_id = 3;
        r.instance_id = 4;
        r.pred_area_cm2 = 12.0;
        r.distance_m = 1.25;
        write_results({r}, dir / "r.csv");
        CHECK(testsupport::slurp(dir / "r.csv") ==
              std::string(kResultsHeader) + "\n3,4,12.0,-1.0,1.0,1.0,1.25,\n");
    }
    SUBCASE("three rows give four lines and round-trip") {
        std::vector<ResultRow> rows(3);
        for (int i = 0; i < 3; ++i) {
            rows[i].image_id = i;
            rows[i].instance_id = 10 + i;
            rows[i].pred_area_cm2 = 0.1 * (i + 1);
            rows[i].gt_area_cm2 = 1.0 / 3.0 + i;
            rows[i].distance_m = 0.5 + i;
        }
        rows[1].pred_area_cm2.reset();
        rows[1].error = "cluster: no cluster";
        write_results(rows, dir / "r.csv");
        const std::string text = testsupport::slurp(dir / "r.csv");
        CHECK(std::count(text.begin(), text.end(), '\n') == 4);
        CHECK(text.find(';') == std::string::npos);
        const auto back = read_results(dir / "r.csv");
        REQUIRE(back.size() == 3);
        for (int i = 0; i < 3; ++i) {
            CHECK(back[i].image_id == rows[i].image_id);
            CHECK(back[i].instance_id == rows[i].instance_id);
            CHECK(back[i].pred_area_cm2 == rows[i].pred_area_cm2);
            CHECK(back[i].gt_area_cm2 == rows[i].gt_area_cm2);
            CHECK(back[i].distance_m == rows[i].distance_m);
            CHECK(back[i].error == rows[i].error);
        }
    }
    SUBCASE("separators inside error text are replaced") {
        ResultRow r;
        r.error = "smooth: a, b\nc";
        write_results({r}, dir / "r.csv");
        CHECK(read_results(dir / "r.csv").at(0).error == "smooth: a; b;c");
    }
    SUBCASE("unwritable path") {
        CHECK_THROWS_AS(write_results({}, dir / "missing_dir/r.csv"), Error);
    }
}

TEST_CASE("format_real") {
    CHECK(format_real(-1.0) == "-1.0");
    CHECK(format_real(0.0) == "0.0");
    CHECK(format_real(0.1) == "0.1");
    CHECK(format_real(56.549) == "56.549");
    CHECK(std::stod(format_real(1.0 / 3.0)) == 1.0 / 3.0);
}

TEST_CASE("synthetic dataset round-trips through save and load") {
    TempDir dir("roundtrip");
    SynthConfig cfg;
    cfg.count = 4;
    cfg.distances = {0.5, 1.0};
    const auto ann = generate_dataset(cfg, dir.path());
    const Dataset ds = load_dataset(ann);
    const auto plan = plan_synthetic_leaves(cfg);
    REQUIRE(ds.instances.size() == plan.size());
    for (std::size_t i = 0; i < plan.size(); ++i) {
        CHECK(ds.instances[i].gt_area_cm2 == plan[i].surface.analytic_area_cm2);
        CHECK(ds.frame(ds.instances[i].image_id).depth_scale == 0.001);
    }

    save_annotations(ds, dir / "again.json");
    const Dataset again = load_dataset(dir / "again.json");
    REQUIRE(again.instances.size() == ds.instances.size());
    for (std::size_t i = 0; i < ds.instances.size(); ++i) {
        CHECK(again.instances[i].polygons == ds.instances[i].polygons);
        CHECK(again.instances[i].gt_area_cm2 == ds.instances[i].gt_area_cm2);
        CHECK(again.instances[i].bitmask == ds.instances[i].bitmask);
    }
    for (const auto& [id, fd] : ds.frames) {
        CHECK(again.frame(id).depth_scale == fd.depth_scale);
        CHECK(again.frame(id).intrinsics == fd.intrinsics);
    }
}
