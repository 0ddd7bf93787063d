// Copyright (C) 2026 The DreamEdit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "dreamedit/image.hpp"

namespace dreamedit {

enum class MaskProvenance { Oracle, ColorSegmenter, External, Derived };
std::string to_string(MaskProvenance p);

/// Binary H x W grid.
struct Mask {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> bits;
    MaskProvenance provenance = MaskProvenance::Derived;

    Mask() = default;
    Mask(int w, int h, bool value = false, MaskProvenance prov = MaskProvenance::Derived)
        : width(w), height(h), bits(static_cast<std::size_t>(w) * h, value ? 1 : 0), provenance(prov) {}

    bool at(int x, int y) const { return bits[static_cast<std::size_t>(y) * width + x] != 0; }
    void set(int x, int y, bool v = true) { bits[static_cast<std::size_t>(y) * width + x] = v ? 1 : 0; }
    std::size_t area() const;
    bool empty() const { return area() == 0; }
    /// Every set pixel of `other` is set here.
    bool contains(const Mask& other) const;
    bool same_bits(const Mask& other) const { return width == other.width && height == other.height && bits == other.bits; }
};

struct Bbox {
    int x = 0, y = 0, w = 0, h = 0;

    bool inside(int width, int height) const { return w >= 1 && h >= 1 && x >= 0 && y >= 0 && x + w <= width && y + h <= height; }
    bool operator==(const Bbox&) const = default;
};

nlohmann::json to_json(const Bbox& b);
Bbox bbox_from_json(const nlohmann::json& j);

Mask mask_from_bbox(int width, int height, const Bbox& box);

void save_mask(const std::filesystem::path& path, const Mask& mask);
Mask load_mask(const std::filesystem::path& path, MaskProvenance provenance = MaskProvenance::Oracle);

/// Pluggable subject segmentation strategy.
class Segmenter {
public:
    virtual ~Segmenter() = default;
    /// Throws SubjectNotFound when no region reaches the minimum area.
    virtual Mask segment(const Image& image, int class_id) const = 0;
    virtual MaskProvenance provenance() const = 0;
};

/// Returns a known ground-truth mask (valid only on unedited generator output).
class OracleSegmenter final : public Segmenter {
public:
    explicit OracleSegmenter(Mask truth) : truth_(std::move(truth)) {}
    Mask segment(const Image& image, int class_id) const override;
    MaskProvenance provenance() const override { return MaskProvenance::Oracle; }

private:
    Mask truth_;
};

struct ColorSegmenterParams {
    /// Minimum max-channel distance from the background reference colour.
    float threshold = 0.2f;
    /// Minimum region area as a fraction of the image.
    double min_area_fraction = 0.002;
};

/// Largest 4-connected region whose colour departs from the background
/// reference (per-channel median of the border pixels).
class ColorSegmenter final : public Segmenter {
public:
    explicit ColorSegmenter(ColorSegmenterParams params = {}) : params_(params) {}
    Mask segment(const Image& image, int class_id) const override;
    MaskProvenance provenance() const override { return MaskProvenance::ColorSegmenter; }

private:
    ColorSegmenterParams params_;
};

Mask segment_subject(const Image& image, int class_id, const Segmenter& segmenter);

/// Largest 4-connected region (the first found wins ties); empty for an empty mask.
Mask largest_component(const Mask& mask);

/// Square m x m dilation; even m is rounded up to the next odd size.
Mask dilate(const Mask& mask, int m);

/// Tight box around the set pixels; throws EmptyMask.
Bbox bbox_of(const Mask& mask);

struct PasteResult {
    Image image;
    /// Destination pixels that received subject colour.
    Mask footprint;
};

/// Nearest-neighbour rescale of the masked subject (its tight box) onto
/// `region` of `dest`. Only pixels under the rescaled mask are written.
PasteResult copy_paste(const Image& dest, const Bbox& region, const Image& subject_image, const Mask& subject_mask);

/// Dilation kernel for a given image size, scaled from m = 20 at 512 px and
/// rounded to odd (3 at 64 px).
int scaled_dilation_kernel(int image_size);

} // namespace dreamedit
