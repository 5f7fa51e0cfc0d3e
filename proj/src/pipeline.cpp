#include "leafarea/pipeline.hpp"

#include <algorithm>

namespace leafarea {

void PipelineConfig::validate() const {
    bilateral.validate();
    require(median_kernel >= 1 && median_kernel % 2 == 1, "median kernel must be odd and >= 1");
    dbscan.validate();
    require(normal_neighbors >= 3, "normal_neighbors must be >= 3");
    meshing.validate();
}

std::optional<double> median_mask_distance(const RgbdFrame& frame, const Mask& mask) {
    require(mask.same_shape(frame.depth), "mask/frame dimension mismatch");
    std::vector<std::uint16_t> raw;
    for (int v = 0; v < mask.height(); ++v)
        for (int u = 0; u < mask.width(); ++u)
            if (mask(u, v) && frame.depth(u, v) != 0) raw.push_back(frame.depth(u, v));
    if (raw.empty()) return std::nullopt;
    const std::size_t n = raw.size();
    std::nth_element(raw.begin(), raw.begin() + n / 2, raw.end());
    double med = raw[n / 2];
    if (n % 2 == 0) {
        const auto lower = *std::max_element(raw.begin(), raw.begin() + n / 2);
        med = 0.5 * (med + lower);
    }
    return med * frame.depth_scale;
}

namespace {

struct Box {
    int u0, v0, u1, v1;  // inclusive
};

std::optional<Box> mask_bbox(const Mask& mask) {
    Box b{mask.width(), mask.height(), -1, -1};
    for (int v = 0; v < mask.height(); ++v)
        for (int u = 0; u < mask.width(); ++u)
            if (mask(u, v)) {
                b.u0 = std::min(b.u0, u);
                b.v0 = std::min(b.v0, v);
                b.u1 = std::max(b.u1, u);
                b.v1 = std::max(b.v1, v);
            }
    if (b.u1 < 0) return std::nullopt;
    return b;
}

DepthRaster crop(const DepthRaster& src, const Box& b) {
    DepthRaster out(b.u1 - b.u0 + 1, b.v1 - b.v0 + 1);
    for (int v = b.v0; v <= b.v1; ++v)
        for (int u = b.u0; u <= b.u1; ++u) out(u - b.u0, v - b.v0) = src(u, v);
    return out;
}

template <typename F>
auto run_stage(const char* name, F&& fn) -> decltype(fn()) {
    try {
        return fn();
    } catch (const StageError&) {
        throw;
    } catch (const Error& e) {
        throw StageError(name, e);
    }
}

}  // namespace

AreaEstimate estimate_leaf_area_ip(const RgbdFrame& frame, const Mask& mask,
                                   const PipelineConfig& config) {
    config.validate();
    frame.validate();
    require(mask.same_shape(frame.depth), "mask/frame dimension mismatch");

    AreaEstimate est;
    PipelineDiagnostics& diag = est.diagnostics;
    diag.masked_pixels = count_set(mask);
    diag.distance_m = median_mask_distance(frame, mask).value_or(0.0);

    RgbdFrame filtered = frame;
    if (const auto box = mask_bbox(mask)) {
        run_stage("filter", [&] {
            const int margin = config.bilateral.normalized_diameter() / 2 + config.median_kernel / 2;
            const Box region{std::max(0, box->u0 - margin), std::max(0, box->v0 - margin),
                             std::min(frame.depth.width() - 1, box->u1 + margin),
                             std::min(frame.depth.height() - 1, box->v1 + margin)};
            const DepthRaster smoothed =
                median_filter(bilateral_filter(crop(frame.depth, region), config.bilateral),
                              config.median_kernel);
            for (int v = box->v0; v <= box->v1; ++v)
                for (int u = box->u0; u <= box->u1; ++u)
                    filtered.depth(u, v) = smoothed(u - region.u0, v - region.v0);
            return 0;
        });
    }

    const PointCloud raw = run_stage("backproject", [&] { return backproject_masked(filtered, mask); });
    diag.points_backprojected = raw.size();
    const PointCloud leaf = run_stage("cluster", [&] { return cluster_filter(raw, config.dbscan); });
    diag.points_clustered = leaf.size();
    est.cloud = run_stage("normals", [&] {
        return estimate_oriented_normals(leaf, config.normal_neighbors);
    });

    PoissonStats stats;
    TriangleMesh mesh = run_stage("reconstruct", [&] {
        return reconstruct_surface(est.cloud, config.meshing, &stats);
    });
    if (config.meshing.backend == MeshBackend::Poisson) diag.poisson = stats;
    diag.triangles_reconstructed = mesh.triangles.size();
    mesh = run_stage("trim", [&] { return trim_low_density(mesh); });
    diag.triangles_trimmed = mesh.triangles.size();
    mesh = run_stage("dedupe", [&] { return remove_duplicate_triangles(mesh); });
    diag.triangles_deduplicated = mesh.triangles.size();
    mesh = run_stage("decimate", [&] {
        return decimate_quadric(mesh, config.meshing.target_triangles);
    });
    diag.triangles_decimated = mesh.triangles.size();
    mesh = run_stage("smooth", [&] {
        return smooth_laplacian(mesh, config.meshing.laplacian_iterations);
    });
    est.area_cm2 = m2_to_cm2(surface_area(mesh));
    est.mesh = std::move(mesh);
    return est;
}

}  // namespace leafarea
