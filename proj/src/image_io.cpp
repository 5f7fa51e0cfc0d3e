#include "leafarea/image_io.hpp"

#include <png.h>

#include <csetjmp>
#include <cstdio>
#include <memory>

namespace leafarea {
namespace {

struct FileCloser {
    void operator()(std::FILE* f) const { std::fclose(f); }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

FilePtr open_file(const std::filesystem::path& path, const char* mode) {
    FilePtr f(std::fopen(path.c_str(), mode));
    if (!f) fail(ErrorKind::Io, "cannot open " + path.string());
    return f;
}

// Decoded image in its native layout: rows of `channels` samples, each sample
// 8 or 16 bits (16-bit stored big-endian-decoded into uint16).
struct Decoded {
    int width = 0, height = 0, channels = 0, bit_depth = 0;
    std::vector<std::uint16_t> samples;
};

void png_error_fn(png_structp png, png_const_charp) { longjmp(png_jmpbuf(png), 1); }
void png_warning_fn(png_structp, png_const_charp) {}

Decoded decode(const std::filesystem::path& path, bool header_only) {
    auto file = open_file(path, "rb");
    png_byte sig[8];
    if (std::fread(sig, 1, 8, file.get()) != 8 || png_sig_cmp(sig, 0, 8) != 0)
        fail(ErrorKind::Format, "not a PNG file: " + path.string());

    png_structp png =
        png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, png_error_fn, png_warning_fn);
    if (!png) fail(ErrorKind::Io, "libpng: out of memory");
    png_infop info = png_create_info_struct(png);
    Decoded out;
    std::vector<png_bytep> rows;
    std::vector<png_byte> buf;
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        fail(ErrorKind::Format, "corrupt PNG: " + path.string());
    }
    png_init_io(png, file.get());
    png_set_sig_bytes(png, 8);
    png_read_info(png, info);

    const int color_type = png_get_color_type(png, info);
    out.width = static_cast<int>(png_get_image_width(png, info));
    out.height = static_cast<int>(png_get_image_height(png, info));
    out.bit_depth = png_get_bit_depth(png, info);
    if (header_only) {
        out.channels = png_get_channels(png, info);
        png_destroy_read_struct(&png, &info, nullptr);
        return out;
    }

    if (color_type == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
    if (color_type == PNG_COLOR_TYPE_GRAY && out.bit_depth < 8)
        png_set_expand_gray_1_2_4_to_8(png);
    if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
    png_read_update_info(png, info);

    out.bit_depth = png_get_bit_depth(png, info);
    out.channels = png_get_channels(png, info);
    const std::size_t rowbytes = png_get_rowbytes(png, info);
    buf.resize(rowbytes * static_cast<std::size_t>(out.height));
    rows.resize(static_cast<std::size_t>(out.height));
    for (int y = 0; y < out.height; ++y) rows[y] = buf.data() + rowbytes * y;
    png_read_image(png, rows.data());
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);

    const std::size_t n = static_cast<std::size_t>(out.width) * out.height * out.channels;
    out.samples.resize(n);
    if (out.bit_depth == 16) {
        for (std::size_t i = 0; i < n; ++i)
            out.samples[i] = static_cast<std::uint16_t>((buf[2 * i] << 8) | buf[2 * i + 1]);
    } else {
        for (std::size_t i = 0; i < n; ++i) out.samples[i] = buf[i];
    }
    return out;
}

void encode(const std::filesystem::path& path, int width, int height, int channels,
            int bit_depth, const std::vector<png_byte>& bytes) {
    auto file = open_file(path, "wb");
    png_structp png =
        png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, png_error_fn, png_warning_fn);
    if (!png) fail(ErrorKind::Io, "libpng: out of memory");
    png_infop info = png_create_info_struct(png);
    std::vector<png_bytep> rows(static_cast<std::size_t>(height));
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        fail(ErrorKind::Io, "failed writing PNG: " + path.string());
    }
    png_init_io(png, file.get());
    const int color_type = channels == 3 ? PNG_COLOR_TYPE_RGB : PNG_COLOR_TYPE_GRAY;
    png_set_IHDR(png, info, static_cast<png_uint_32>(width), static_cast<png_uint_32>(height),
                 bit_depth, color_type, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
                 PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    const std::size_t rowbytes =
        static_cast<std::size_t>(width) * channels * (bit_depth == 16 ? 2 : 1);
    for (int y = 0; y < height; ++y)
        rows[y] = const_cast<png_bytep>(bytes.data()) + rowbytes * y;
    png_write_image(png, rows.data());
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

}  // namespace

ImageSize png_info(const std::filesystem::path& path) {
    const Decoded d = decode(path, true);
    return {d.width, d.height, d.bit_depth, d.channels};
}

ColorRaster read_color_png(const std::filesystem::path& path) {
    const Decoded d = decode(path, false);
    if (d.bit_depth != 8) fail(ErrorKind::Format, "color PNG must be 8-bit: " + path.string());
    ColorRaster img(d.width, d.height);
    auto& px = img.data();
    for (std::size_t i = 0; i < px.size(); ++i) {
        const std::uint16_t* s = &d.samples[i * d.channels];
        if (d.channels >= 3)
            px[i] = {static_cast<std::uint8_t>(s[0]), static_cast<std::uint8_t>(s[1]),
                     static_cast<std::uint8_t>(s[2])};
        else
            px[i] = {static_cast<std::uint8_t>(s[0]), static_cast<std::uint8_t>(s[0]),
                     static_cast<std::uint8_t>(s[0])};
    }
    return img;
}

void write_color_png(const std::filesystem::path& path, const ColorRaster& img) {
    std::vector<png_byte> bytes;
    bytes.reserve(img.size() * 3);
    for (const Rgb& c : img.data()) {
        bytes.push_back(c.r);
        bytes.push_back(c.g);
        bytes.push_back(c.b);
    }
    encode(path, img.width(), img.height(), 3, 8, bytes);
}

DepthRaster read_depth_png(const std::filesystem::path& path) {
    const Decoded d = decode(path, false);
    if (d.bit_depth != 16 || d.channels != 1)
        fail(ErrorKind::Format, "depth PNG must be 16-bit single-channel: " + path.string());
    return DepthRaster(d.width, d.height, d.samples);
}

void write_depth_png(const std::filesystem::path& path, const DepthRaster& depth) {
    std::vector<png_byte> bytes;
    bytes.reserve(depth.size() * 2);
    for (std::uint16_t v : depth.data()) {
        bytes.push_back(static_cast<png_byte>(v >> 8));
        bytes.push_back(static_cast<png_byte>(v & 0xff));
    }
    encode(path, depth.width(), depth.height(), 1, 16, bytes);
}

Raster<std::uint8_t> read_gray8_png(const std::filesystem::path& path) {
    const Decoded d = decode(path, false);
    if (d.bit_depth != 8) fail(ErrorKind::Format, "expected 8-bit PNG: " + path.string());
    Raster<std::uint8_t> img(d.width, d.height);
    auto& px = img.data();
    for (std::size_t i = 0; i < px.size(); ++i)
        px[i] = static_cast<std::uint8_t>(d.samples[i * d.channels]);
    return img;
}

void write_gray8_png(const std::filesystem::path& path, const Raster<std::uint8_t>& img) {
    std::vector<png_byte> bytes(img.data().begin(), img.data().end());
    encode(path, img.width(), img.height(), 1, 8, bytes);
}

}  // namespace leafarea
