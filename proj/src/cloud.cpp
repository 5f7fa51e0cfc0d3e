#include "leafarea/cloud.hpp"

#include <cmath>
#include <fstream>

#include <Eigen/Eigenvalues>

#include "leafarea/spatial.hpp"

namespace leafarea {

PointCloud PointCloud::select(const std::vector<int>& indices) const {
    PointCloud out;
    out.camera = camera;
    out.points.reserve(indices.size());
    for (int i : indices) out.points.push_back(points[i]);
    if (!normals.empty())
        for (int i : indices) out.normals.push_back(normals[i]);
    if (!colors.empty())
        for (int i : indices) out.colors.push_back(colors[i]);
    if (!pixels.empty())
        for (int i : indices) out.pixels.push_back(pixels[i]);
    return out;
}

void PointCloud::validate() const {
    const std::size_t n = points.size();
    require(normals.empty() || normals.size() == n, "point cloud: normals length mismatch");
    require(colors.empty() || colors.size() == n, "point cloud: colors length mismatch");
    require(pixels.empty() || pixels.size() == n, "point cloud: pixels length mismatch");
    for (const Vec3& nrm : normals)
        require(std::abs(nrm.norm() - 1.0) <= 1e-6, "point cloud: normal is not unit length");
}

PointCloud backproject_masked(const RgbdFrame& frame, const Mask& mask) {
    frame.validate();
    require(mask.same_shape(frame.depth), "backproject: mask does not match frame");
    PointCloud cloud;
    cloud.camera = frame.intrinsics;
    for (int v = 0; v < mask.height(); ++v)
        for (int u = 0; u < mask.width(); ++u) {
            if (!mask(u, v)) continue;
            const std::uint16_t raw = frame.depth(u, v);
            if (raw == 0) continue;
            const double z = raw * frame.depth_scale;
            cloud.points.push_back(frame.intrinsics.backproject(u, v, z));
            cloud.colors.push_back(frame.color(u, v));
            cloud.pixels.push_back({u, v});
        }
    if (cloud.empty()) fail(ErrorKind::Degenerate, "no valid masked pixels");
    return cloud;
}

std::vector<int> dbscan(std::span<const Vec3> points, const DbscanParams& params) {
    params.validate();
    constexpr int kUnvisited = -2;
    const int n = static_cast<int>(points.size());
    std::vector<int> labels(points.size(), kUnvisited);
    if (n == 0) return labels;

    const VoxelGrid grid(points, params.eps);
    std::vector<int> neighbors, frontier;
    int next_label = 0;
    for (int i = 0; i < n; ++i) {
        if (labels[i] != kUnvisited) continue;
        grid.radius_query(points[i], params.eps, neighbors);
        if (static_cast<int>(neighbors.size()) < params.min_pts) {
            labels[i] = kNoise;
            continue;
        }
        const int label = next_label++;
        labels[i] = label;
        frontier.assign(neighbors.begin(), neighbors.end());
        while (!frontier.empty()) {
            const int q = frontier.back();
            frontier.pop_back();
            if (labels[q] == kNoise) labels[q] = label;  // border point
            if (labels[q] != kUnvisited) continue;
            labels[q] = label;
            grid.radius_query(points[q], params.eps, neighbors);
            if (static_cast<int>(neighbors.size()) >= params.min_pts)
                for (int r : neighbors)
                    if (labels[r] == kUnvisited || labels[r] == kNoise) frontier.push_back(r);
        }
    }
    return labels;
}

PointCloud cluster_filter(const PointCloud& cloud, const DbscanParams& params) {
    require(!cloud.empty(), "cluster_filter: empty cloud");
    const std::vector<int> labels = dbscan(cloud.points, params);
    std::vector<int> counts;
    for (int l : labels)
        if (l >= 0) {
            if (l >= static_cast<int>(counts.size())) counts.resize(l + 1, 0);
            ++counts[l];
        }
    if (counts.empty()) fail(ErrorKind::Degenerate, "no cluster");
    int best = 0;
    for (int l = 1; l < static_cast<int>(counts.size()); ++l)
        if (counts[l] > counts[best]) best = l;
    std::vector<int> keep;
    for (int i = 0; i < static_cast<int>(labels.size()); ++i)
        if (labels[i] == best) keep.push_back(i);
    return cloud.select(keep);
}

PointCloud estimate_oriented_normals(const PointCloud& cloud, int k_neighbors) {
    require(k_neighbors >= 3, "normals: k_neighbors must be >= 3");
    require(cloud.size() >= static_cast<std::size_t>(k_neighbors),
            "normals: cloud smaller than k_neighbors");
    const KdTree tree(cloud.points);
    PointCloud out = cloud;
    out.normals.assign(cloud.size(), Vec3::Zero());
    bool any_defined = false;
    for (std::size_t i = 0; i < cloud.size(); ++i) {
        const Vec3& p = cloud.points[i];
        const std::vector<int> nn = tree.knn(p, k_neighbors);
        Vec3 mean = Vec3::Zero();
        for (int j : nn) mean += cloud.points[j];
        mean /= static_cast<double>(nn.size());
        Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
        for (int j : nn) {
            const Vec3 d = cloud.points[j] - mean;
            cov += d * d.transpose();
        }
        Vec3 n;
        if (cov.trace() <= 0) {
            // coincident neighborhood: fall back to the viewing ray
            n = p.norm() > 0 ? Vec3(-p.normalized()) : Vec3(0, 0, -1);
        } else {
            Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(cov);
            n = es.eigenvectors().col(0).normalized();  // eigenvalues ascending
            any_defined = true;
        }
        if (n.dot(p) > 0) n = -n;
        out.normals[i] = n;
    }
    if (!any_defined) fail(ErrorKind::Degenerate, "normals: degenerate neighborhood (all points identical)");
    return out;
}

void write_ply(const PointCloud& cloud, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) fail(ErrorKind::Io, "cannot write " + path.string());
    out << "ply\nformat ascii 1.0\nelement vertex " << cloud.size()
        << "\nproperty float x\nproperty float y\nproperty float z\n"
           "property float nx\nproperty float ny\nproperty float nz\n"
           "property uchar red\nproperty uchar green\nproperty uchar blue\nend_header\n";
    out.precision(9);
    for (std::size_t i = 0; i < cloud.size(); ++i) {
        const Vec3& p = cloud.points[i];
        const Vec3 n = cloud.has_normals() ? cloud.normals[i] : Vec3::Zero();
        const Rgb c = cloud.colors.empty() ? Rgb{} : cloud.colors[i];
        out << p.x() << ' ' << p.y() << ' ' << p.z() << ' ' << n.x() << ' ' << n.y() << ' '
            << n.z() << ' ' << int(c.r) << ' ' << int(c.g) << ' ' << int(c.b) << '\n';
    }
}

}  // namespace leafarea
