// Copyright (C) 2026 The DreamEdit Authors
// SPDX-License-Identifier: Apache-2.0

#include "dreamedit/masking.hpp"

#include <algorithm>
#include <cmath>

#include "dreamedit/error.hpp"
#include "dreamedit/vocab.hpp"

namespace dreamedit {

std::string to_string(MaskProvenance p) {
    switch (p) {
    case MaskProvenance::Oracle: return "oracle";
    case MaskProvenance::ColorSegmenter: return "color-segmenter";
    case MaskProvenance::External: return "external";
    case MaskProvenance::Derived: return "derived";
    }
    return "?";
}

std::size_t Mask::area() const { return static_cast<std::size_t>(std::count(bits.begin(), bits.end(), 1)); }

bool Mask::contains(const Mask& other) const {
    if (width != other.width || height != other.height) return false;
    for (std::size_t i = 0; i < bits.size(); ++i)
        if (other.bits[i] && !bits[i]) return false;
    return true;
}

nlohmann::json to_json(const Bbox& b) { return nlohmann::json::array({b.x, b.y, b.w, b.h}); }

Bbox bbox_from_json(const nlohmann::json& j) {
    require(j.is_array() && j.size() == 4, ErrorKind::Format, "bbox must be [x, y, w, h]");
    return {j[0].get<int>(), j[1].get<int>(), j[2].get<int>(), j[3].get<int>()};
}

Mask mask_from_bbox(int width, int height, const Bbox& box) {
    require(box.inside(width, height), ErrorKind::DegenerateRegion, "bbox outside image");
    Mask m(width, height);
    for (int y = box.y; y < box.y + box.h; ++y)
        for (int x = box.x; x < box.x + box.w; ++x) m.set(x, y);
    return m;
}

void save_mask(const std::filesystem::path& path, const Mask& mask) {
    save_bits_png(path, mask.width, mask.height, mask.bits);
}

Mask load_mask(const std::filesystem::path& path, MaskProvenance provenance) {
    Mask m;
    m.bits = load_bits_png(path, m.width, m.height);
    m.provenance = provenance;
    return m;
}

Mask OracleSegmenter::segment(const Image& image, int) const {
    require(truth_.width == image.width && truth_.height == image.height, ErrorKind::ShapeMismatch,
            "oracle mask does not match image");
    require(!truth_.empty(), ErrorKind::SubjectNotFound, "oracle mask is empty");
    Mask m = truth_;
    m.provenance = MaskProvenance::Oracle;
    return m;
}

Mask largest_component(const Mask& mask) {
    const int W = mask.width, H = mask.height;
    const auto& fg = mask.bits;
    // Label 4-connected components, keep the largest (first found wins ties).
    std::vector<int> label(fg.size(), -1);
    std::vector<int> stack;
    int best_label = -1;
    std::size_t best_area = 0;
    int next = 0;
    for (std::size_t start = 0; start < fg.size(); ++start) {
        if (!fg[start] || label[start] >= 0) continue;
        std::size_t area = 0;
        label[start] = next;
        stack.assign(1, static_cast<int>(start));
        while (!stack.empty()) {
            const int idx = stack.back();
            stack.pop_back();
            ++area;
            const int x = idx % W, y = idx / W;
            const int nbr[4][2] = {{x - 1, y}, {x + 1, y}, {x, y - 1}, {x, y + 1}};
            for (const auto& n : nbr) {
                if (n[0] < 0 || n[0] >= W || n[1] < 0 || n[1] >= H) continue;
                const int j = n[1] * W + n[0];
                if (fg[j] && label[j] < 0) {
                    label[j] = next;
                    stack.push_back(j);
                }
            }
        }
        if (area > best_area) {
            best_area = area;
            best_label = next;
        }
        ++next;
    }
    Mask m(W, H, false, mask.provenance);
    for (std::size_t i = 0; i < label.size(); ++i) m.bits[i] = best_label >= 0 && label[i] == best_label ? 1 : 0;
    return m;
}

Mask ColorSegmenter::segment(const Image& image, int) const {
    const int W = image.width, H = image.height;
    require(W > 0 && H > 0, ErrorKind::ShapeMismatch, "empty image");
    Rgb ref{};
    {
        std::vector<float> border[3];
        for (int x = 0; x < W; ++x)
            for (int y : {0, H - 1})
                for (int c = 0; c < 3; ++c) border[c].push_back(image.at(x, y, c));
        for (int y = 1; y < H - 1; ++y)
            for (int x : {0, W - 1})
                for (int c = 0; c < 3; ++c) border[c].push_back(image.at(x, y, c));
        for (int c = 0; c < 3; ++c) {
            auto& b = border[c];
            std::nth_element(b.begin(), b.begin() + b.size() / 2, b.end());
            ref[c] = b[b.size() / 2];
        }
    }
    std::vector<std::uint8_t> fg(static_cast<std::size_t>(W) * H, 0);
    for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x) {
            float d = 0.0f;
            for (int c = 0; c < 3; ++c) d = std::max(d, std::fabs(image.at(x, y, c) - ref[c]));
            fg[static_cast<std::size_t>(y) * W + x] = d > params_.threshold ? 1 : 0;
        }

    Mask fg_mask(W, H, false, MaskProvenance::ColorSegmenter);
    fg_mask.bits = std::move(fg);
    Mask m = largest_component(fg_mask);
    const auto min_area = static_cast<std::size_t>(std::ceil(params_.min_area_fraction * W * H));
    require(!m.empty() && m.area() >= min_area, ErrorKind::SubjectNotFound,
            "no region above " + std::to_string(min_area) + " px");
    m.provenance = MaskProvenance::ColorSegmenter;
    return m;
}

Mask segment_subject(const Image& image, int class_id, const Segmenter& segmenter) {
    require(class_id >= 0 && class_id < kClassCount, ErrorKind::InvalidParameter, "class outside benchmark vocabulary");
    return segmenter.segment(image, class_id);
}

Mask dilate(const Mask& mask, int m) {
    require(m >= 1, ErrorKind::InvalidParameter, "dilation kernel must be >= 1");
    if (m % 2 == 0) ++m;
    const int r = m / 2;
    const int W = mask.width, H = mask.height;
    // Separable: a square window max equals a row max followed by a column max.
    Mask rows(W, H);
    for (int y = 0; y < H; ++y) {
        int last = -1 - r;  // most recent set pixel at or left of x + r
        for (int x = 0; x < W + r; ++x) {
            if (x < W && mask.at(x, y)) last = x;
            const int cx = x - r;
            if (cx >= 0 && last >= cx - r) rows.set(cx, y);
        }
    }
    Mask out(W, H, false, mask.provenance);
    for (int x = 0; x < W; ++x) {
        int last = -1 - r;
        for (int y = 0; y < H + r; ++y) {
            if (y < H && rows.at(x, y)) last = y;
            const int cy = y - r;
            if (cy >= 0 && last >= cy - r) out.set(x, cy);
        }
    }
    return out;
}

Bbox bbox_of(const Mask& mask) {
    int x0 = mask.width, y0 = mask.height, x1 = -1, y1 = -1;
    for (int y = 0; y < mask.height; ++y)
        for (int x = 0; x < mask.width; ++x)
            if (mask.at(x, y)) {
                x0 = std::min(x0, x);
                x1 = std::max(x1, x);
                y0 = std::min(y0, y);
                y1 = std::max(y1, y);
            }
    require(x1 >= 0, ErrorKind::EmptyMask, "bbox of empty mask");
    return {x0, y0, x1 - x0 + 1, y1 - y0 + 1};
}

PasteResult copy_paste(const Image& dest, const Bbox& region, const Image& subject_image, const Mask& subject_mask) {
    require(subject_mask.width == subject_image.width && subject_mask.height == subject_image.height,
            ErrorKind::ShapeMismatch, "subject mask does not match subject image");
    require(region.inside(dest.width, dest.height), ErrorKind::DegenerateRegion, "paste region outside destination");
    const Bbox src = bbox_of(subject_mask);
    PasteResult out{dest, Mask(dest.width, dest.height)};
    for (int y = 0; y < region.h; ++y) {
        const int sy = src.y + static_cast<int>(static_cast<long long>(y) * src.h / region.h);
        for (int x = 0; x < region.w; ++x) {
            const int sx = src.x + static_cast<int>(static_cast<long long>(x) * src.w / region.w);
            if (!subject_mask.at(sx, sy)) continue;
            out.image.set(region.x + x, region.y + y, subject_image.rgb(sx, sy));
            out.footprint.set(region.x + x, region.y + y);
        }
    }
    return out;
}

int scaled_dilation_kernel(int image_size) {
    int m = static_cast<int>(std::lround(20.0 * image_size / 512.0));
    if (m < 1) m = 1;
    if (m % 2 == 0) ++m;
    return m;
}

} // namespace dreamedit
