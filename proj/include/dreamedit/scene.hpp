// Copyright (C) 2026 The DreamEdit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <optional>

#include <nlohmann/json.hpp>

#include "dreamedit/image.hpp"
#include "dreamedit/masking.hpp"
#include "dreamedit/rng.hpp"
#include "dreamedit/vocab.hpp"

namespace dreamedit {

/// Low-saturation textured backdrop with an optional darker floor band.
struct BackgroundSpec {
    Texture texture = Texture::Plain;
    float hue = 0.0f;
    float saturation = 0.1f;
    float value = 0.45f;
    float amplitude = 0.05f;  // texture swing in value
    int period = 8;
    int floor_y = -1;  // first floor row; < 0 when absent
    float floor_shade = 0.07f;
};

/// Hard-edged sprite; `size` is the bounding square side in pixels.
struct SubjectSpec {
    int class_id = 0;
    Shape shape = Shape::Circle;
    Pattern pattern = Pattern::Solid;
    float hue = 0.0f;
    float saturation = 0.9f;
    float value = 0.9f;
    int size = 20;
    int x = 0;  // top-left corner
    int y = 0;
    /// Vertical squash for the unusual-viewpoint variant; 1 is upright.
    float aspect = 1.0f;

    Bbox bbox() const;
};

struct SceneSpec {
    BackgroundSpec background;
    std::optional<SubjectSpec> subject;
};

struct RenderedScene {
    Image image;
    Mask mask;  // subject footprint (empty when there is no subject)
};

Image render_background(const BackgroundSpec& spec, int size);
/// Draws `subject` over `image`, recording the footprint in `mask` when given.
void draw_subject(Image& image, Mask* mask, const SubjectSpec& subject);
RenderedScene render_scene(const SceneSpec& spec, int size);

/// Colours the sprite can take (both stripe colours for striped patterns).
std::vector<Rgb> subject_colors(const SubjectSpec& subject);
std::vector<Rgb> background_colors(const BackgroundSpec& spec);
/// Smallest max-channel distance between any subject and background colour.
float subject_contrast(const SubjectSpec& subject, const BackgroundSpec& background);

BackgroundSpec random_background(Rng& rng, int size, bool with_floor);
/// Samples a saturated hue/value pair with the given hue, retrying value and
/// saturation until the sprite stands out from `background`.
void pick_contrasting_color(Rng& rng, SubjectSpec& subject, const BackgroundSpec& background);

nlohmann::json to_json(const BackgroundSpec& spec);
nlohmann::json to_json(const SubjectSpec& spec);
BackgroundSpec background_from_json(const nlohmann::json& j);
SubjectSpec subject_from_json(const nlohmann::json& j);

} // namespace dreamedit
