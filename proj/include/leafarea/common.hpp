#pragma once

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace leafarea {

using Vec3 = Eigen::Vector3d;

// Error categories surfaced through the C API as status codes.
enum class ErrorKind {
    InvalidArgument,
    Io,
    Format,
    Degenerate,
    Numeric,
};

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what)
        : std::runtime_error(what), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) {
    throw Error(kind, what);
}

inline void require(bool cond, const std::string& what) {
    if (!cond) fail(ErrorKind::InvalidArgument, what);
}

/// Row-major single-plane raster. Pixel (u, v) is column u, row v.
template <typename T>
class Raster {
public:
    Raster() = default;
    Raster(int width, int height, T fill = T{})
        : width_(width), height_(height),
          data_(static_cast<std::size_t>(checked(width, height)), fill) {}
    Raster(int width, int height, std::vector<T> data)
        : width_(width), height_(height), data_(std::move(data)) {
        require(width >= 0 && height >= 0 &&
                    data_.size() == static_cast<std::size_t>(width) *
                                        static_cast<std::size_t>(height),
                "raster data size does not match dimensions");
    }

    int width() const noexcept { return width_; }
    int height() const noexcept { return height_; }
    std::size_t size() const noexcept { return data_.size(); }
    bool empty() const noexcept { return data_.empty(); }

    T& operator()(int u, int v) { return data_[index(u, v)]; }
    const T& operator()(int u, int v) const { return data_[index(u, v)]; }

    bool contains(int u, int v) const noexcept {
        return u >= 0 && v >= 0 && u < width_ && v < height_;
    }
    bool same_shape(int w, int h) const noexcept { return w == width_ && h == height_; }
    template <typename U>
    bool same_shape(const Raster<U>& o) const noexcept {
        return same_shape(o.width(), o.height());
    }

    std::vector<T>& data() noexcept { return data_; }
    const std::vector<T>& data() const noexcept { return data_; }

    bool operator==(const Raster&) const = default;

private:
    static long long checked(int w, int h) {
        require(w >= 0 && h >= 0, "raster dimensions must be non-negative");
        return static_cast<long long>(w) * h;
    }
    std::size_t index(int u, int v) const noexcept {
        return static_cast<std::size_t>(v) * static_cast<std::size_t>(width_) +
               static_cast<std::size_t>(u);
    }

    int width_ = 0;
    int height_ = 0;
    std::vector<T> data_;
};

using DepthRaster = Raster<std::uint16_t>;
using Mask = Raster<std::uint8_t>;

struct Rgb {
    std::uint8_t r = 0, g = 0, b = 0;
    bool operator==(const Rgb&) const = default;
};
using ColorRaster = Raster<Rgb>;

inline std::size_t count_set(const Mask& m) {
    std::size_t n = 0;
    for (auto px : m.data()) n += px != 0;
    return n;
}

/// Pinhole intrinsics in pixels.
struct CameraIntrinsics {
    double fx = 0, fy = 0, cx = 0, cy = 0;
    int width = 0, height = 0;

    void validate() const {
        require(fx > 0 && fy > 0, "intrinsics: focal lengths must be positive");
        require(width > 0 && height > 0, "intrinsics: image size must be positive");
        require(cx >= 0 && cx < width && cy >= 0 && cy < height,
                "intrinsics: principal point outside image");
    }

    Vec3 backproject(double u, double v, double z) const {
        return {(u - cx) * z / fx, (v - cy) * z / fy, z};
    }
    Eigen::Vector2d project(const Vec3& p) const {
        return {fx * p.x() / p.z() + cx, fy * p.y() / p.z() + cy};
    }

    bool operator==(const CameraIntrinsics&) const = default;
};

struct RgbdFrame {
    ColorRaster color;
    DepthRaster depth;
    double depth_scale = 0.001;  // meters per raw unit
    CameraIntrinsics intrinsics;

    void validate() const {
        intrinsics.validate();
        require(depth_scale > 0, "depth_scale must be positive");
        require(color.same_shape(depth), "color/depth dimension mismatch");
        require(depth.same_shape(intrinsics.width, intrinsics.height),
                "depth raster does not match intrinsics size");
    }
};

}  // namespace leafarea
