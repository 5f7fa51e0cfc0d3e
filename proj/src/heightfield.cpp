#include <unordered_map>

#include "leafarea/mesh.hpp"

namespace leafarea {

TriangleMesh reconstruct_heightfield(const PointCloud& cloud) {
    if (cloud.pixels.size() != cloud.size() || !cloud.camera)
        fail(ErrorKind::InvalidArgument,
             "heightfield backend needs a back-projected cloud (pixel indices and intrinsics)");
    const CameraIntrinsics& cam = *cloud.camera;
    const long long stride = static_cast<long long>(cam.width) + 1;

    // Corner (i, j) sits at pixel coordinates (i - 0.5, j - 0.5) and touches
    // pixels (i-1..i, j-1..j).
    struct Accum {
        double z_sum = 0;
        int count = 0;
        int vertex = -1;
    };
    std::unordered_map<long long, Accum> corners;
    auto corner_key = [&](int i, int j) { return static_cast<long long>(j) * stride + i; };
    for (std::size_t k = 0; k < cloud.size(); ++k) {
        const PixelIndex px = cloud.pixels[k];
        const double z = cloud.points[k].z();
        for (int dj = 0; dj <= 1; ++dj)
            for (int di = 0; di <= 1; ++di) {
                Accum& a = corners[corner_key(px.u + di, px.v + dj)];
                a.z_sum += z;
                ++a.count;
            }
    }

    TriangleMesh mesh;
    auto vertex_of = [&](int i, int j) {
        Accum& a = corners.at(corner_key(i, j));
        if (a.vertex < 0) {
            a.vertex = static_cast<int>(mesh.vertices.size());
            mesh.vertices.push_back(cam.backproject(i - 0.5, j - 0.5, a.z_sum / a.count));
        }
        return a.vertex;
    };
    mesh.triangles.reserve(2 * cloud.size());
    for (const PixelIndex& px : cloud.pixels) {
        const int c00 = vertex_of(px.u, px.v);
        const int c10 = vertex_of(px.u + 1, px.v);
        const int c11 = vertex_of(px.u + 1, px.v + 1);
        const int c01 = vertex_of(px.u, px.v + 1);
        // wound so normals face the camera (-z)
        mesh.triangles.push_back({c00, c11, c10});
        mesh.triangles.push_back({c00, c01, c11});
    }
    mesh.densities.assign(mesh.vertices.size(), 1.0);
    return mesh;
}

}  // namespace leafarea
