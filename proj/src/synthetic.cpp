#include "leafarea/synthetic.hpp"

#include <cmath>
#include <cstdio>
#include <numbers>
#include <random>
#include <sstream>

#include "leafarea/image_io.hpp"

namespace leafarea {
namespace fs = std::filesystem;

namespace {

constexpr double kCm = 0.01;
constexpr double kSyntheticDepthScale = 0.001;

// Uniform [0, 1) from the top 53 bits; identical on every platform.
double unit_draw(std::mt19937_64& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

Eigen::Matrix3d rot_x(double rad) {
    return Eigen::AngleAxisd(rad, Vec3::UnitX()).toRotationMatrix();
}
Eigen::Matrix3d rot_z(double rad) {
    return Eigen::AngleAxisd(rad, Vec3::UnitZ()).toRotationMatrix();
}

std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
    std::uint64_t z = a + 0x9E3779B97F4A7C15ull * (b + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

}  // namespace

LeafSurface make_leaf_surface(const LeafShape& shape, const Pose& pose) {
    LeafSurface s{shape, pose, 0.0};
    if (const auto* e = std::get_if<PlanarEllipse>(&shape)) {
        require(e->a_cm > 0 && e->b_cm > 0, "planar_ellipse: semi-axes must be positive");
        s.analytic_area_cm2 = std::numbers::pi * e->a_cm * e->b_cm;
    } else {
        const auto& c = std::get<CylindricalPatch>(shape);
        require(c.radius_cm > 0 && c.arc_rad > 0 && c.width_cm > 0,
                "cylindrical_patch: dimensions must be positive");
        require(c.arc_rad < std::numbers::pi, "cylindrical_patch: arc must be below pi");
        s.analytic_area_cm2 = c.radius_cm * c.arc_rad * c.width_cm;
    }
    return s;
}

const char* shape_name(const LeafShape& shape) {
    return std::holds_alternative<PlanarEllipse>(shape) ? "planar_ellipse" : "cylindrical_patch";
}

std::optional<double> LeafSurface::intersect(const Vec3& origin, const Vec3& dir) const {
    const Eigen::Matrix3d rt = pose.rotation.transpose();
    const Vec3 o = rt * (origin - pose.translation);
    const Vec3 d = rt * dir;

    if (const auto* e = std::get_if<PlanarEllipse>(&shape)) {
        if (std::abs(d.z()) < 1e-15) return std::nullopt;
        const double s = -o.z() / d.z();
        if (!(s > 0)) return std::nullopt;
        const Vec3 p = o + s * d;
        const double a = e->a_cm * kCm, b = e->b_cm * kCm;
        if ((p.x() / a) * (p.x() / a) + (p.y() / b) * (p.y() / b) > 1.0) return std::nullopt;
        return s;
    }

    const auto& c = std::get<CylindricalPatch>(shape);
    const double r = c.radius_cm * kCm, half_w = 0.5 * c.width_cm * kCm;
    // circle of radius r centered at (x, z) = (0, -r)
    const double oz = o.z() + r;
    const double qa = d.x() * d.x() + d.z() * d.z();
    if (qa < 1e-30) return std::nullopt;
    const double qb = 2.0 * (o.x() * d.x() + oz * d.z());
    const double qc = o.x() * o.x() + oz * oz - r * r;
    const double disc = qb * qb - 4.0 * qa * qc;
    if (disc < 0) return std::nullopt;
    const double sq = std::sqrt(disc);
    for (double s : {(-qb - sq) / (2.0 * qa), (-qb + sq) / (2.0 * qa)}) {
        if (!(s > 0)) continue;
        const Vec3 p = o + s * d;
        const double phi = std::atan2(p.x(), p.z() + r);
        if (std::abs(phi) <= 0.5 * c.arc_rad && std::abs(p.y()) <= half_w) return s;
    }
    return std::nullopt;
}

std::vector<Vec3> LeafSurface::outline(int samples) const {
    require(samples >= 8, "outline: need at least 8 samples");
    std::vector<Vec3> local;
    if (const auto* e = std::get_if<PlanarEllipse>(&shape)) {
        for (int k = 0; k < samples; ++k) {
            const double t = 2.0 * std::numbers::pi * k / samples;
            local.emplace_back(e->a_cm * kCm * std::cos(t), e->b_cm * kCm * std::sin(t), 0.0);
        }
    } else {
        const auto& c = std::get<CylindricalPatch>(shape);
        const double r = c.radius_cm * kCm, half_w = 0.5 * c.width_cm * kCm;
        const int per_side = samples / 4;
        auto on_surface = [&](double phi, double y) {
            return Vec3(r * std::sin(phi), y, r * std::cos(phi) - r);
        };
        const double h = 0.5 * c.arc_rad;
        for (int k = 0; k < per_side; ++k)
            local.push_back(on_surface(-h + c.arc_rad * k / per_side, -half_w));
        for (int k = 0; k < per_side; ++k)
            local.push_back(on_surface(h, -half_w + 2.0 * half_w * k / per_side));
        for (int k = 0; k < per_side; ++k)
            local.push_back(on_surface(h - c.arc_rad * k / per_side, half_w));
        for (int k = 0; k < per_side; ++k)
            local.push_back(on_surface(-h, half_w - 2.0 * half_w * k / per_side));
    }
    for (Vec3& p : local) p = pose.rotation * p + pose.translation;
    return local;
}

void NoiseSpec::validate() const {
    require(quant_step >= 0, "noise: quant_step must be >= 0");
    require(sp_prob >= 0 && sp_prob <= 1, "noise: sp_prob must lie in [0, 1]");
}

DepthRaster corrupt_depth(const DepthRaster& depth, const NoiseSpec& noise) {
    noise.validate();
    DepthRaster out = depth;
    if (noise.quant_step > 1) {
        const long q = noise.quant_step;
        const long top = (65535 / q) * q;
        for (auto& px : out.data()) {
            const long rounded = (static_cast<long>(px) + q / 2) / q * q;
            px = static_cast<std::uint16_t>(std::min(rounded, top));
        }
    }
    if (noise.sp_prob > 0) {
        std::mt19937_64 rng(noise.seed);
        const double half = 0.5 * noise.sp_prob;
        for (auto& px : out.data()) {
            const double r = unit_draw(rng);
            if (r < half)
                px = 0;
            else if (r < noise.sp_prob)
                px = 65535;
        }
    }
    return out;
}

CameraIntrinsics default_synthetic_intrinsics() {
    CameraIntrinsics k;
    k.width = 1280;
    k.height = 720;
    k.fx = k.fy = 920.0;
    k.cx = 640.0;
    k.cy = 360.0;
    return k;
}

SyntheticFrame render_rgbd(const LeafSurface& surface, const CameraIntrinsics& intrinsics,
                           double distance_m, const NoiseSpec& noise) {
    intrinsics.validate();
    noise.validate();
    require(distance_m > 0, "render_rgbd: distance must be positive");

    LeafSurface placed = surface;
    placed.pose.translation = Vec3(surface.pose.translation.x(), surface.pose.translation.y(), distance_m);

    SyntheticFrame out;
    out.area_cm2 = surface.analytic_area_cm2;
    const int w = intrinsics.width, h = intrinsics.height;

    for (const Vec3& p : placed.outline(512)) {
        if (!(p.z() > 0)) fail(ErrorKind::InvalidArgument, "render_rgbd: leaf behind the camera");
        const Eigen::Vector2d px = intrinsics.project(p);
        if (px.x() < 1 || px.y() < 1 || px.x() > w - 2 || px.y() > h - 2)
            fail(ErrorKind::InvalidArgument, "render_rgbd: leaf projects outside frame");
        // annotation coordinates put pixel centers at +0.5
        out.outline.emplace_back(px.x() + 0.5, px.y() + 0.5);
    }

    const double background_z = distance_m + kBackgroundOffset;
    RgbdFrame& f = out.frame;
    f.intrinsics = intrinsics;
    f.depth_scale = kSyntheticDepthScale;
    f.color = ColorRaster(w, h);
    f.depth = DepthRaster(w, h);
    out.mask = Mask(w, h, 0);
    const Vec3 origin = Vec3::Zero();
    auto to_raw = [](double z) {
        return static_cast<std::uint16_t>(std::clamp(std::lround(z / kSyntheticDepthScale), 1L, 65535L));
    };
    for (int v = 0; v < h; ++v)
        for (int u = 0; u < w; ++u) {
            const Vec3 dir((u - intrinsics.cx) / intrinsics.fx, (v - intrinsics.cy) / intrinsics.fy, 1.0);
            if (auto s = placed.intersect(origin, dir)) {
                // dir.z == 1, so the ray parameter is the depth
                f.depth(u, v) = to_raw(*s);
                out.mask(u, v) = 1;
                const int shade = static_cast<int>(12.0 * std::sin(0.05 * u) * std::cos(0.07 * v));
                f.color(u, v) = {static_cast<std::uint8_t>(45 + shade / 2),
                                 static_cast<std::uint8_t>(150 + shade),
                                 static_cast<std::uint8_t>(50)};
            } else {
                f.depth(u, v) = to_raw(background_z);
                const bool dark = ((u / 16) + (v / 16)) % 2 == 0;
                f.color(u, v) = dark ? Rgb{110, 90, 70} : Rgb{150, 130, 105};
            }
        }
    if (count_set(out.mask) == 0)
        fail(ErrorKind::InvalidArgument, "render_rgbd: leaf covers no pixel center");
    f.depth = corrupt_depth(f.depth, noise);
    return out;
}

void SynthConfig::validate() const {
    require(count >= 1, "synth: count must be >= 1");
    require(!distances.empty(), "synth: no distances");
    for (double d : distances) require(d > 0, "synth: distances must be positive");
    require(min_area_cm2 > 0 && min_area_cm2 <= max_area_cm2, "synth: bad area range");
    require(max_tilt_deg >= 0 && max_tilt_deg < 80, "synth: max tilt must lie in [0, 80)");
    noise.validate();
    intrinsics.validate();
}

std::vector<double> parse_distances(const std::string& spec) {
    std::vector<double> out;
    auto number = [&](const std::string& s) {
        std::size_t used = 0;
        double v = 0;
        try {
            v = std::stod(s, &used);
        } catch (const std::exception&) {
            used = 0;
        }
        if (used == 0 || used != s.size())
            fail(ErrorKind::InvalidArgument, "distances: cannot parse '" + s + "'");
        return v;
    };
    if (spec.find(':') != std::string::npos) {
        std::vector<std::string> parts;
        std::stringstream ss(spec);
        for (std::string p; std::getline(ss, p, ':');) parts.push_back(p);
        require(parts.size() == 3, "distances: expected start:stop:step");
        const double start = number(parts[0]), stop = number(parts[1]), step = number(parts[2]);
        require(step > 0 && start <= stop, "distances: need step > 0 and start <= stop");
        for (int k = 0;; ++k) {
            const double d = start + k * step;
            if (d > stop + 1e-9 * step) break;
            out.push_back(d);
        }
    } else {
        std::stringstream ss(spec);
        for (std::string p; std::getline(ss, p, ',');) out.push_back(number(p));
    }
    require(!out.empty(), "distances: empty list");
    return out;
}

std::vector<SynthLeaf> plan_synthetic_leaves(const SynthConfig& config) {
    config.validate();
    std::mt19937_64 rng(config.seed);
    std::vector<SynthLeaf> leaves;
    for (int i = 0; i < config.count; ++i) {
        const double area = config.min_area_cm2 + (config.max_area_cm2 - config.min_area_cm2) * unit_draw(rng);
        LeafShape shape;
        if (config.planar_only || i % 2 == 0) {
            const double ratio = 0.45 + 0.4 * unit_draw(rng);
            const double a = std::sqrt(area / (std::numbers::pi * ratio));
            shape = PlanarEllipse{a, ratio * a};
        } else {
            double radius = 5.0 + 10.0 * unit_draw(rng);
            const double ratio = 0.6 + 0.8 * unit_draw(rng);
            const double length = std::sqrt(area / ratio);
            constexpr double max_arc = 2.0 * std::numbers::pi / 3.0;
            double arc = length / radius;
            if (arc > max_arc) {
                arc = max_arc;
                radius = length / max_arc;
            }
            shape = CylindricalPatch{radius, arc, ratio * length};
        }
        const double tilt = config.max_tilt_deg * unit_draw(rng) * std::numbers::pi / 180.0;
        const double spin = (-30.0 + 60.0 * unit_draw(rng)) * std::numbers::pi / 180.0;
        Pose pose;
        pose.rotation = rot_x(tilt) * rot_z(spin);
        pose.translation = Vec3(0.04 * (unit_draw(rng) - 0.5), 0.04 * (unit_draw(rng) - 0.5), 0.0);
        SynthLeaf leaf;
        leaf.image_id = i + 1;
        leaf.surface = make_leaf_surface(shape, pose);
        leaf.distance_m = config.distances[static_cast<std::size_t>(i) % config.distances.size()];
        leaves.push_back(std::move(leaf));
    }
    return leaves;
}

fs::path generate_dataset(const SynthConfig& config, const fs::path& out_dir) {
    const std::vector<SynthLeaf> leaves = plan_synthetic_leaves(config);
    std::error_code ec;
    fs::create_directories(out_dir / "color", ec);
    fs::create_directories(out_dir / "depth", ec);
    if (ec) fail(ErrorKind::Io, "cannot create " + out_dir.string() + ": " + ec.message());

    Dataset ds;
    ds.root = out_dir;
    ds.split = SplitTag::Test;
    for (const SynthLeaf& leaf : leaves) {
        NoiseSpec noise = config.noise;
        noise.seed = mix_seed(config.noise.seed ^ config.seed, static_cast<std::uint64_t>(leaf.image_id));
        const SyntheticFrame sf = render_rgbd(leaf.surface, config.intrinsics, leaf.distance_m, noise);

        char name[32];
        std::snprintf(name, sizeof name, "%06lld.png", static_cast<long long>(leaf.image_id));
        FrameDescriptor fd;
        fd.image_id = leaf.image_id;
        fd.file_name = std::string("color/") + name;
        fd.depth_file_name = std::string("depth/") + name;
        fd.depth_scale = sf.frame.depth_scale;
        fd.intrinsics = config.intrinsics;
        write_color_png(out_dir / fd.file_name, sf.frame.color);
        write_depth_png(out_dir / fd.depth_file_name, sf.frame.depth);
        ds.frames.emplace(fd.image_id, fd);

        AnnotatedInstance inst;
        inst.instance_id = leaf.image_id;
        inst.image_id = leaf.image_id;
        inst.polygons = {sf.outline};
        inst.bitmask = rasterize_polygons(inst.polygons, config.intrinsics.width, config.intrinsics.height);
        inst.gt_area_cm2 = sf.area_cm2;
        ds.instances.push_back(std::move(inst));
    }
    const fs::path annotations = out_dir / "annotations.json";
    save_annotations(ds, annotations);
    return annotations;
}

}  // namespace leafarea
