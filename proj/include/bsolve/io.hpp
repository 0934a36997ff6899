#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <csetjmp>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <memory>
#include <string>
#include <vector>

#include <png.h>

#include "bsolve/error.hpp"
#include "bsolve/raster.hpp"

namespace bsolve {

// BSF1 float container:
//   bytes 0-3   "BSF1"
//   bytes 4-15  width, height, channels as little-endian uint32
//   then        width*height*channels little-endian IEEE-754 float32, planar (channel-major,
//               then row-major within a channel)

namespace detail {

inline void put_u32(std::vector<unsigned char>& out, std::uint32_t v)
{
    for (int k = 0; k < 4; ++k) out.push_back(static_cast<unsigned char>(v >> (8 * k)));
}

inline std::uint32_t get_u32(const unsigned char* p)
{
    return static_cast<std::uint32_t>(p[0]) | static_cast<std::uint32_t>(p[1]) << 8 |
           static_cast<std::uint32_t>(p[2]) << 16 | static_cast<std::uint32_t>(p[3]) << 24;
}

}  // namespace detail

inline std::vector<unsigned char> encode_bsf(const Raster& r)
{
    std::vector<unsigned char> out{'B', 'S', 'F', '1'};
    out.reserve(16 + r.values.size() * 4);
    detail::put_u32(out, static_cast<std::uint32_t>(r.width));
    detail::put_u32(out, static_cast<std::uint32_t>(r.height));
    detail::put_u32(out, static_cast<std::uint32_t>(r.channels));
    for (float v : r.values) detail::put_u32(out, std::bit_cast<std::uint32_t>(v));
    return out;
}

inline Raster decode_bsf(const std::vector<unsigned char>& bytes)
{
    if (bytes.size() < 16 || std::memcmp(bytes.data(), "BSF1", 4) != 0) {
        throw IoError("BSF1: missing magic");
    }
    const std::uint32_t w = detail::get_u32(bytes.data() + 4);
    const std::uint32_t h = detail::get_u32(bytes.data() + 8);
    const std::uint32_t c = detail::get_u32(bytes.data() + 12);
    if (w == 0 || h == 0 || c == 0) throw IoError("BSF1: zero dimension");
    const std::uint64_t count = static_cast<std::uint64_t>(w) * h * c;
    if (bytes.size() != 16 + count * 4) {
        throw IoError("BSF1: expected " + std::to_string(16 + count * 4) + " bytes, got " +
                      std::to_string(bytes.size()));
    }
    Raster r(static_cast<int>(w), static_cast<int>(h), static_cast<int>(c));
    for (std::size_t i = 0; i < count; ++i) r.values[i] = std::bit_cast<float>(detail::get_u32(bytes.data() + 16 + 4 * i));
    return r;
}

inline std::vector<unsigned char> read_file(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path + "' for reading");
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void write_file(const std::string& path, const std::vector<unsigned char>& bytes)
{
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open '" + path + "' for writing");
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("write to '" + path + "' failed");
}

inline Raster read_bsf(const std::string& path) { return decode_bsf(read_file(path)); }
inline void write_bsf(const std::string& path, const Raster& r) { write_file(path, encode_bsf(r)); }

namespace detail {

struct FileCloser {
    void operator()(std::FILE* f) const { std::fclose(f); }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

struct PngError {
    char message[256] = {};
};

extern "C" inline void png_error_to_jmp(png_structp png, png_const_charp msg)
{
    auto* err = static_cast<PngError*>(png_get_error_ptr(png));
    std::snprintf(err->message, sizeof(err->message), "%s", msg);
    png_longjmp(png, 1);
}

extern "C" inline void png_warning_ignore(png_structp, png_const_charp) {}

struct PngHeader {
    png_uint_32 width = 0, height = 0;
    int bit_depth = 0, channels = 0;
};

// Reads header and pixel rows. No C++ objects with destructors live in this frame after setjmp;
// storage is owned by the caller.
inline bool png_read_impl(std::FILE* fp, PngError& err, PngHeader& hdr, std::vector<unsigned char>& pixels,
                          std::vector<png_bytep>& rows)
{
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, &err, png_error_to_jmp, png_warning_ignore);
    if (!png) return false;
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_read_struct(&png, nullptr, nullptr);
        return false;
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        return false;
    }
    png_init_io(png, fp);
    png_read_info(png, info);
    const int color = png_get_color_type(png, info);
    if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
    if (color == PNG_COLOR_TYPE_GRAY && png_get_bit_depth(png, info) < 8) png_set_expand_gray_1_2_4_to_8(png);
    if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
    png_set_strip_alpha(png);
    if (png_get_bit_depth(png, info) == 16 && std::endian::native == std::endian::little) png_set_swap(png);
    png_read_update_info(png, info);

    hdr.width = png_get_image_width(png, info);
    hdr.height = png_get_image_height(png, info);
    hdr.bit_depth = png_get_bit_depth(png, info);
    hdr.channels = png_get_channels(png, info);
    const std::size_t rowbytes = png_get_rowbytes(png, info);
    pixels.resize(rowbytes * hdr.height);
    rows.resize(hdr.height);
    for (png_uint_32 y = 0; y < hdr.height; ++y) rows[y] = pixels.data() + y * rowbytes;
    png_read_image(png, rows.data());
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);
    return true;
}

inline bool png_write_impl(std::FILE* fp, PngError& err, const PngHeader& hdr, std::vector<png_bytep>& rows)
{
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, &err, png_error_to_jmp, png_warning_ignore);
    if (!png) return false;
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_write_struct(&png, nullptr);
        return false;
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        return false;
    }
    png_init_io(png, fp);
    png_set_IHDR(png, info, hdr.width, hdr.height, hdr.bit_depth,
                 hdr.channels == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE,
                 PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    if (hdr.bit_depth == 16 && std::endian::native == std::endian::little) png_set_swap(png);
    png_write_image(png, rows.data());
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
    return true;
}

}  // namespace detail

/// Reads an 8- or 16-bit PNG. Values are in raw levels (0-255 or 0-65535); alpha is dropped and
/// palettes are expanded to RGB.
inline Raster read_png(const std::string& path)
{
    detail::FilePtr fp(std::fopen(path.c_str(), "rb"));
    if (!fp) throw IoError("cannot open '" + path + "' for reading");
    detail::PngError err;
    detail::PngHeader hdr;
    std::vector<unsigned char> pixels;
    std::vector<png_bytep> rows;
    if (!detail::png_read_impl(fp.get(), err, hdr, pixels, rows)) {
        throw IoError("PNG read failed for '" + path + "': " + err.message);
    }
    if (hdr.channels != 1 && hdr.channels != 3) {
        throw IoError("PNG '" + path + "': unsupported channel layout");
    }
    Raster r(static_cast<int>(hdr.width), static_cast<int>(hdr.height), hdr.channels);
    const std::size_t np = r.pixels();
    for (std::size_t i = 0; i < np; ++i) {
        for (int c = 0; c < hdr.channels; ++c) {
            const std::size_t s = i * hdr.channels + c;
            float v;
            if (hdr.bit_depth == 16) {
                std::uint16_t w;
                std::memcpy(&w, pixels.data() + 2 * s, 2);
                v = w;
            } else {
                v = pixels[s];
            }
            r.values[c * np + i] = v;
        }
    }
    return r;
}

/// Writes a 1- or 3-channel raster as PNG, rounding and clamping to the level range.
inline void write_png(const std::string& path, const Raster& r, int bit_depth = 8)
{
    if (bit_depth != 8 && bit_depth != 16) throw ParameterError("write_png: bit depth must be 8 or 16");
    if (r.channels != 1 && r.channels != 3) throw DimensionError("write_png: raster must have 1 or 3 channels");
    const double top = bit_depth == 16 ? 65535.0 : 255.0;
    const std::size_t np = r.pixels();
    const std::size_t bytes_per = bit_depth / 8;
    std::vector<unsigned char> pixels(np * r.channels * bytes_per);
    for (std::size_t i = 0; i < np; ++i) {
        for (int c = 0; c < r.channels; ++c) {
            const double v = r.values[c * np + i];
            const double q = std::clamp(std::isfinite(v) ? std::round(v) : 0.0, 0.0, top);
            const std::size_t s = i * r.channels + c;
            if (bit_depth == 16) {
                const auto w = static_cast<std::uint16_t>(q);
                std::memcpy(pixels.data() + 2 * s, &w, 2);
            } else {
                pixels[s] = static_cast<unsigned char>(q);
            }
        }
    }
    std::vector<png_bytep> rows(r.height);
    const std::size_t rowbytes = static_cast<std::size_t>(r.width) * r.channels * bytes_per;
    for (int y = 0; y < r.height; ++y) rows[y] = pixels.data() + y * rowbytes;

    detail::FilePtr fp(std::fopen(path.c_str(), "wb"));
    if (!fp) throw IoError("cannot open '" + path + "' for writing");
    detail::PngError err;
    const detail::PngHeader hdr{static_cast<png_uint_32>(r.width), static_cast<png_uint_32>(r.height), bit_depth,
                                r.channels};
    if (!detail::png_write_impl(fp.get(), err, hdr, rows)) {
        throw IoError("PNG write failed for '" + path + "': " + err.message);
    }
}

inline bool is_png_path(const std::string& path)
{
    std::string ext = std::filesystem::path(path).extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char ch) { return std::tolower(ch); });
    return ext == ".png";
}

/// Dispatches on extension: ".png" is PNG, anything else is BSF1.
inline Raster read_raster(const std::string& path) { return is_png_path(path) ? read_png(path) : read_bsf(path); }

inline void write_raster(const std::string& path, const Raster& r, int png_bit_depth = 8)
{
    if (is_png_path(path)) {
        write_png(path, r, png_bit_depth);
    } else {
        write_bsf(path, r);
    }
}

}  // namespace bsolve
