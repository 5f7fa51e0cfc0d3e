#pragma once

#include <filesystem>

#include "leafarea/common.hpp"

namespace leafarea {

struct ImageSize {
    int width = 0;
    int height = 0;
    int bit_depth = 0;
    int channels = 0;
};

/// Reads only the IHDR chunk.
ImageSize png_info(const std::filesystem::path& path);

/// 8-bit RGB, RGBA or gray PNG; alpha is dropped and gray replicated.
ColorRaster read_color_png(const std::filesystem::path& path);
void write_color_png(const std::filesystem::path& path, const ColorRaster& img);

/// 16-bit single-channel PNG holding raw depth units.
DepthRaster read_depth_png(const std::filesystem::path& path);
void write_depth_png(const std::filesystem::path& path, const DepthRaster& depth);

/// 8-bit single-channel PNG.
Raster<std::uint8_t> read_gray8_png(const std::filesystem::path& path);
void write_gray8_png(const std::filesystem::path& path, const Raster<std::uint8_t>& img);

}  // namespace leafarea
