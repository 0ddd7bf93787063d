// Copyright (C) 2026 The DreamEdit Authors
// SPDX-License-Identifier: Apache-2.0

#include "dreamedit/scene.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "dreamedit/error.hpp"

namespace dreamedit {

namespace {

constexpr float kStripeDarken = 0.6f;
constexpr int kStripeWidth = 3;
constexpr float kMinContrast = 0.3f;

float texture_offset(const BackgroundSpec& b, int x, int y, int size) {
    const int half = std::max(1, b.period / 2);
    switch (b.texture) {
    case Texture::Plain: return 0.0f;
    case Texture::Stripes: return (x / half) % 2 == 0 ? b.amplitude : -b.amplitude;
    case Texture::Checker: return (x / half + y / half) % 2 == 0 ? b.amplitude : -b.amplitude;
    case Texture::Gradient: return b.amplitude * (2.0f * (x + 0.5f) / size - 1.0f);
    }
    return 0.0f;
}

bool inside_star(float u, float v) {
    constexpr int kPoints = 5;
    constexpr float kInner = 0.45f;
    float px[2 * kPoints], py[2 * kPoints];
    for (int i = 0; i < 2 * kPoints; ++i) {
        const double angle = -std::numbers::pi / 2 + i * std::numbers::pi / kPoints;
        const float r = i % 2 == 0 ? 1.0f : kInner;
        px[i] = r * static_cast<float>(std::cos(angle));
        py[i] = r * static_cast<float>(std::sin(angle));
    }
    bool in = false;
    for (int i = 0, j = 2 * kPoints - 1; i < 2 * kPoints; j = i++) {
        if ((py[i] > v) != (py[j] > v) && u < (px[j] - px[i]) * (v - py[i]) / (py[j] - py[i]) + px[i]) in = !in;
    }
    return in;
}

bool inside_shape(Shape shape, float u, float v) {
    switch (shape) {
    case Shape::Circle: return u * u + v * v <= 1.0f;
    case Shape::Square: return std::fabs(u) <= 1.0f && std::fabs(v) <= 1.0f;
    case Shape::Triangle: return v <= 1.0f && std::fabs(u) <= (v + 1.0f) / 2.0f;
    case Shape::Star: return inside_star(u, v);
    }
    return false;
}

Texture texture_from_string(const std::string& name) {
    for (Texture t : {Texture::Plain, Texture::Stripes, Texture::Checker, Texture::Gradient})
        if (to_string(t) == name) return t;
    fail(ErrorKind::Format, "unknown texture '" + name + "'");
}

} // namespace

Bbox SubjectSpec::bbox() const {
    return Bbox{x, y, size, std::max(1, static_cast<int>(std::lround(size * aspect)))};
}

Image render_background(const BackgroundSpec& b, int size) {
    Image img(size, size);
    for (int y = 0; y < size; ++y) {
        for (int x = 0; x < size; ++x) {
            float v = b.value + texture_offset(b, x, y, size);
            if (b.floor_y >= 0 && y >= b.floor_y) v -= b.floor_shade;
            img.set(x, y, hsv_to_rgb(b.hue, b.saturation, std::clamp(v, 0.0f, 1.0f)));
        }
    }
    return img;
}

void draw_subject(Image& image, Mask* mask, const SubjectSpec& s) {
    const Bbox box = s.bbox();
    require(box.inside(image.width, image.height), ErrorKind::InvalidParameter, "subject leaves the image");
    const Rgb light = hsv_to_rgb(s.hue, s.saturation, s.value);
    const Rgb dark = hsv_to_rgb(s.hue, s.saturation, s.value * kStripeDarken);
    Mask footprint(image.width, image.height);
    for (int y = box.y; y < box.y + box.h; ++y) {
        const float v = 2.0f * (y - box.y + 0.5f) / box.h - 1.0f;
        for (int x = box.x; x < box.x + box.w; ++x) {
            const float u = 2.0f * (x - box.x + 0.5f) / box.w - 1.0f;
            if (inside_shape(s.shape, u, v)) footprint.set(x, y);
        }
    }
    // Thin star tips can rasterize as detached pixels; keep the body only.
    footprint = largest_component(footprint);
    for (int y = box.y; y < box.y + box.h; ++y) {
        const bool stripe = s.pattern == Pattern::Striped && ((y - box.y) / kStripeWidth) % 2 == 1;
        for (int x = box.x; x < box.x + box.w; ++x) {
            if (!footprint.at(x, y)) continue;
            image.set(x, y, stripe ? dark : light);
            if (mask != nullptr) mask->set(x, y, true);
        }
    }
}

RenderedScene render_scene(const SceneSpec& spec, int size) {
    RenderedScene out{render_background(spec.background, size), Mask(size, size, false, MaskProvenance::Oracle)};
    if (spec.subject) draw_subject(out.image, &out.mask, *spec.subject);
    return out;
}

std::vector<Rgb> subject_colors(const SubjectSpec& s) {
    std::vector<Rgb> out{hsv_to_rgb(s.hue, s.saturation, s.value)};
    if (s.pattern == Pattern::Striped) out.push_back(hsv_to_rgb(s.hue, s.saturation, s.value * kStripeDarken));
    return out;
}

std::vector<Rgb> background_colors(const BackgroundSpec& b) {
    std::vector<Rgb> out;
    for (float offset : {-b.amplitude, 0.0f, b.amplitude}) {
        out.push_back(hsv_to_rgb(b.hue, b.saturation, std::clamp(b.value + offset, 0.0f, 1.0f)));
        if (b.floor_y >= 0)
            out.push_back(hsv_to_rgb(b.hue, b.saturation, std::clamp(b.value + offset - b.floor_shade, 0.0f, 1.0f)));
    }
    return out;
}

float subject_contrast(const SubjectSpec& subject, const BackgroundSpec& background) {
    float best = 1.0f;
    for (const Rgb& a : subject_colors(subject)) {
        for (const Rgb& b : background_colors(background)) {
            float d = 0.0f;
            for (int c = 0; c < 3; ++c) d = std::max(d, std::fabs(a[c] - b[c]));
            best = std::min(best, d);
        }
    }
    return best;
}

BackgroundSpec random_background(Rng& rng, int size, bool with_floor) {
    static constexpr Texture kTextures[] = {Texture::Plain, Texture::Stripes, Texture::Checker, Texture::Gradient};
    static constexpr int kPeriods[] = {6, 8, 10, 12};
    BackgroundSpec b;
    b.texture = kTextures[rng.uniform_int(0, 3)];
    b.hue = static_cast<float>(rng.uniform(0.0, 360.0));
    b.saturation = static_cast<float>(rng.uniform(0.03, 0.25));
    b.value = static_cast<float>(rng.uniform(0.3, 0.6));
    b.amplitude = static_cast<float>(rng.uniform(0.03, 0.05));
    b.period = kPeriods[rng.uniform_int(0, 3)];
    if (with_floor) b.floor_y = static_cast<int>(rng.uniform_int(size * 6 / 10, size * 8 / 10));
    return b;
}

void pick_contrasting_color(Rng& rng, SubjectSpec& subject, const BackgroundSpec& background) {
    SubjectSpec best = subject;
    float best_contrast = -1.0f;
    for (int attempt = 0; attempt < 32; ++attempt) {
        subject.saturation = static_cast<float>(rng.uniform(0.75, 1.0));
        subject.value = static_cast<float>(rng.uniform(0.8, 1.0));
        const float c = subject_contrast(subject, background);
        if (c >= kMinContrast) return;
        if (c > best_contrast) best_contrast = c, best = subject;
    }
    subject = best;
}

nlohmann::json to_json(const BackgroundSpec& b) {
    return {{"texture", to_string(b.texture)}, {"hue", b.hue},         {"saturation", b.saturation},
            {"value", b.value},                {"amplitude", b.amplitude}, {"period", b.period},
            {"floor_y", b.floor_y},            {"floor_shade", b.floor_shade}};
}

nlohmann::json to_json(const SubjectSpec& s) {
    return {{"class", classes()[s.class_id].name},
            {"shape", to_string(s.shape)},
            {"pattern", s.pattern == Pattern::Solid ? "solid" : "striped"},
            {"hue", s.hue},
            {"saturation", s.saturation},
            {"value", s.value},
            {"size", s.size},
            {"x", s.x},
            {"y", s.y},
            {"aspect", s.aspect}};
}

BackgroundSpec background_from_json(const nlohmann::json& j) {
    BackgroundSpec b;
    b.texture = texture_from_string(j.at("texture").get<std::string>());
    b.hue = j.at("hue").get<float>();
    b.saturation = j.at("saturation").get<float>();
    b.value = j.at("value").get<float>();
    b.amplitude = j.at("amplitude").get<float>();
    b.period = j.at("period").get<int>();
    b.floor_y = j.at("floor_y").get<int>();
    b.floor_shade = j.at("floor_shade").get<float>();
    return b;
}

SubjectSpec subject_from_json(const nlohmann::json& j) {
    SubjectSpec s;
    s.class_id = class_id(j.at("class").get<std::string>());
    s.shape = shape_from_string(j.at("shape").get<std::string>());
    s.pattern = j.at("pattern").get<std::string>() == "striped" ? Pattern::Striped : Pattern::Solid;
    s.hue = j.at("hue").get<float>();
    s.saturation = j.at("saturation").get<float>();
    s.value = j.at("value").get<float>();
    s.size = j.at("size").get<int>();
    s.x = j.at("x").get<int>();
    s.y = j.at("y").get<int>();
    s.aspect = j.at("aspect").get<float>();
    return s;
}

} // namespace dreamedit
