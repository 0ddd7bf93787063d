// Copyright (C) 2026 The DreamEdit Authors
// SPDX-License-Identifier: Apache-2.0

#include "dreamedit/image.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <memory>

#include <png.h>

#include "dreamedit/error.hpp"

namespace dreamedit {

Rgb hsv_to_rgb(float hue_deg, float saturation, float value) {
    float h = std::fmod(hue_deg, 360.0f);
    if (h < 0) h += 360.0f;
    const float c = value * saturation;
    const float hp = h / 60.0f;
    const float x = c * (1.0f - std::fabs(std::fmod(hp, 2.0f) - 1.0f));
    float r = 0, g = 0, b = 0;
    switch (static_cast<int>(hp)) {
    case 0: r = c, g = x; break;
    case 1: r = x, g = c; break;
    case 2: g = c, b = x; break;
    case 3: g = x, b = c; break;
    case 4: r = x, b = c; break;
    default: r = c, b = x; break;
    }
    const float m = value - c;
    return {r + m, g + m, b + m};
}

float hue_distance(float a_deg, float b_deg) {
    float d = std::fmod(std::fabs(a_deg - b_deg), 360.0f);
    return d > 180.0f ? 360.0f - d : d;
}

Image quantize8(const Image& image) {
    Image out = image;
    for (auto& v : out.pixels) v = std::round(std::clamp(v, 0.0f, 1.0f) * 255.0f) / 255.0f;
    return out;
}

float max_abs_diff(const Image& a, const Image& b) {
    require(a.width == b.width && a.height == b.height, ErrorKind::ShapeMismatch, "image sizes differ");
    float worst = 0.0f;
    for (std::size_t i = 0; i < a.pixels.size(); ++i) worst = std::max(worst, std::fabs(a.pixels[i] - b.pixels[i]));
    return worst;
}

float mean_abs_diff(const Image& a, const Image& b) {
    require(a.width == b.width && a.height == b.height, ErrorKind::ShapeMismatch, "image sizes differ");
    double sum = 0.0;
    for (std::size_t i = 0; i < a.pixels.size(); ++i) sum += std::fabs(a.pixels[i] - b.pixels[i]);
    return a.pixels.empty() ? 0.0f : static_cast<float>(sum / static_cast<double>(a.pixels.size()));
}

namespace {

struct FileCloser {
    void operator()(std::FILE* f) const { std::fclose(f); }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

FilePtr open_file(const std::filesystem::path& path, const char* mode) {
    FilePtr f(std::fopen(path.c_str(), mode));
    require(f != nullptr, ErrorKind::Io, "cannot open " + path.string());
    return f;
}

void write_png(const std::filesystem::path& path, int width, int height, int color_type, int bit_depth,
               const std::vector<std::vector<png_byte>>& rows) {
    auto file = open_file(path, "wb");
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    require(png != nullptr, ErrorKind::Io, "png_create_write_struct failed");
    png_infop info = png_create_info_struct(png);
    if (info == nullptr || setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        fail(ErrorKind::Io, "failed writing " + path.string());
    }
    png_init_io(png, file.get());
    png_set_IHDR(png, info, width, height, bit_depth, color_type, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
                 PNG_FILTER_TYPE_DEFAULT);
    // No timestamps or text chunks: files must be byte-stable across runs.
    png_write_info(png, info);
    for (const auto& row : rows) png_write_row(png, row.data());
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

struct Decoded {
    int width = 0;
    int height = 0;
    int channels = 0;
    std::vector<png_byte> data;
};

Decoded read_png(const std::filesystem::path& path, bool gray) {
    auto file = open_file(path, "rb");
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    require(png != nullptr, ErrorKind::Io, "png_create_read_struct failed");
    png_infop info = png_create_info_struct(png);
    if (info == nullptr || setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        fail(ErrorKind::Format, "failed reading " + path.string());
    }
    png_init_io(png, file.get());
    png_read_info(png, info);
    const auto color_type = png_get_color_type(png, info);
    const auto bit_depth = png_get_bit_depth(png, info);
    if (bit_depth == 16) png_set_strip_16(png);
    if (color_type == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
    if (color_type == PNG_COLOR_TYPE_GRAY && bit_depth < 8) png_set_expand_gray_1_2_4_to_8(png);
    if (color_type & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
    if (gray) {
        if (color_type & PNG_COLOR_MASK_COLOR) png_set_rgb_to_gray_fixed(png, 1, -1, -1);
    } else if (!(color_type & PNG_COLOR_MASK_COLOR)) {
        png_set_gray_to_rgb(png);
    }
    png_read_update_info(png, info);
    Decoded out;
    out.width = static_cast<int>(png_get_image_width(png, info));
    out.height = static_cast<int>(png_get_image_height(png, info));
    out.channels = gray ? 1 : 3;
    const auto rowbytes = png_get_rowbytes(png, info);
    require(rowbytes == static_cast<png_size_t>(out.width * out.channels), ErrorKind::Format,
            "unexpected PNG layout in " + path.string());
    out.data.resize(rowbytes * out.height);
    std::vector<png_bytep> rows(out.height);
    for (int y = 0; y < out.height; ++y) rows[y] = out.data.data() + rowbytes * y;
    png_read_image(png, rows.data());
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);
    return out;
}

} // namespace

void save_png(const std::filesystem::path& path, const Image& image) {
    std::vector<std::vector<png_byte>> rows(image.height, std::vector<png_byte>(image.width * 3));
    for (int y = 0; y < image.height; ++y)
        for (int x = 0; x < image.width; ++x)
            for (int c = 0; c < 3; ++c)
                rows[y][x * 3 + c] =
                    static_cast<png_byte>(std::lround(std::clamp(image.at(x, y, c), 0.0f, 1.0f) * 255.0f));
    write_png(path, image.width, image.height, PNG_COLOR_TYPE_RGB, 8, rows);
}

Image load_png(const std::filesystem::path& path) {
    const auto decoded = read_png(path, false);
    Image image(decoded.width, decoded.height);
    for (std::size_t i = 0; i < image.pixels.size(); ++i) image.pixels[i] = decoded.data[i] / 255.0f;
    return image;
}

void save_bits_png(const std::filesystem::path& path, int width, int height, const std::vector<unsigned char>& bits) {
    require(bits.size() == static_cast<std::size_t>(width) * height, ErrorKind::ShapeMismatch, "mask size");
    std::vector<std::vector<png_byte>> rows(height, std::vector<png_byte>((width + 7) / 8, 0));
    for (int y = 0; y < height; ++y)
        for (int x = 0; x < width; ++x)
            if (bits[static_cast<std::size_t>(y) * width + x]) rows[y][x / 8] |= static_cast<png_byte>(0x80 >> (x % 8));
    write_png(path, width, height, PNG_COLOR_TYPE_GRAY, 1, rows);
}

std::vector<unsigned char> load_bits_png(const std::filesystem::path& path, int& width, int& height) {
    const auto decoded = read_png(path, true);
    width = decoded.width;
    height = decoded.height;
    std::vector<unsigned char> bits(decoded.data.size());
    for (std::size_t i = 0; i < bits.size(); ++i) bits[i] = decoded.data[i] >= 128 ? 1 : 0;
    return bits;
}

} // namespace dreamedit
