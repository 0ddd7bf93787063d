// Copyright (C) 2026 The DreamEdit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <vector>

namespace dreamedit {

using Rgb = std::array<float, 3>;

/// Interleaved HWC RGB image with values in [0, 1].
struct Image {
    int width = 0;
    int height = 0;
    std::vector<float> pixels;

    Image() = default;
    Image(int w, int h, float fill = 0.0f) : width(w), height(h), pixels(static_cast<std::size_t>(w) * h * 3, fill) {}

    std::size_t pixel_count() const { return static_cast<std::size_t>(width) * height; }
    bool empty() const { return pixels.empty(); }

    float& at(int x, int y, int c) { return pixels[(static_cast<std::size_t>(y) * width + x) * 3 + c]; }
    float at(int x, int y, int c) const { return pixels[(static_cast<std::size_t>(y) * width + x) * 3 + c]; }

    Rgb rgb(int x, int y) const {
        const auto* p = &pixels[(static_cast<std::size_t>(y) * width + x) * 3];
        return {p[0], p[1], p[2]};
    }
    void set(int x, int y, const Rgb& v) {
        auto* p = &pixels[(static_cast<std::size_t>(y) * width + x) * 3];
        p[0] = v[0];
        p[1] = v[1];
        p[2] = v[2];
    }

    bool operator==(const Image&) const = default;
};

/// HSV with hue in degrees [0, 360), saturation and value in [0, 1].
Rgb hsv_to_rgb(float hue_deg, float saturation, float value);

/// Smallest absolute angular difference in degrees, in [0, 180].
float hue_distance(float a_deg, float b_deg);

/// Round to the 8-bit grid used by PNG storage.
Image quantize8(const Image& image);

float max_abs_diff(const Image& a, const Image& b);
float mean_abs_diff(const Image& a, const Image& b);

void save_png(const std::filesystem::path& path, const Image& image);
Image load_png(const std::filesystem::path& path);

/// 1-bit grayscale PNG of a binary grid (row-major, values 0/1).
void save_bits_png(const std::filesystem::path& path, int width, int height, const std::vector<unsigned char>& bits);
std::vector<unsigned char> load_bits_png(const std::filesystem::path& path, int& width, int& height);

} // namespace dreamedit
