// Copyright (C) 2026 The DreamEdit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "dreamedit/denoiser.hpp"
#include "dreamedit/image.hpp"
#include "dreamedit/masking.hpp"

namespace dreamedit {

/// Deterministic map from an image of any size to a unit-norm vector.
class Embedder {
public:
    virtual ~Embedder() = default;
    virtual std::string tag() const = 0;
    virtual std::vector<float> embed(const Image& image) const = 0;
};

/// Slot A: 4x4-cell mean colour (centred on mid-gray) plus a magnitude-weighted
/// gradient-orientation histogram. Sensitive to layout and texture.
class CellGradientEmbedder final : public Embedder {
public:
    std::string tag() const override { return "cell_gradient"; }
    std::vector<float> embed(const Image& image) const override;
};

/// Slot B: global 4x4x4 RGB histogram under a fixed Gaussian projection.
class ProjectedHistogramEmbedder final : public Embedder {
public:
    ProjectedHistogramEmbedder();
    std::string tag() const override { return "projected_histogram"; }
    std::vector<float> embed(const Image& image) const override;

private:
    std::vector<float> projection_;  // [out][bins]
};

struct EmbedderPair {
    const Embedder* a = nullptr;
    const Embedder* b = nullptr;
};

/// Shared default instances.
EmbedderPair default_embedders();

/// Cosine similarity clamped to [0, 1]; throws ZeroVector.
double cosine_sim(std::span<const float> u, std::span<const float> v);

struct Regions {
    Image subject;     // tight crop of the masked pixels, the rest mid-gray
    Image background;  // full image with masked pixels mid-gray
};

/// Throws EmptyMask / ShapeMismatch.
Regions split_regions(const Image& image, const Mask& mask);

struct AutoMetrics {
    double dino_sub = 0.0;
    double dino_back = 0.0;
    double clipi_sub = 0.0;
    double clipi_back = 0.0;

    /// (d_s * d_b * c_s * c_b)^(1/4)
    double geomean() const;
    /// Mean of the two subject columns.
    double subject() const { return 0.5 * (dino_sub + clipi_sub); }
    double background() const { return 0.5 * (dino_back + clipi_back); }
};

nlohmann::json to_json(const AutoMetrics& m);
AutoMetrics auto_metrics_from_json(const nlohmann::json& j);

/// Subject columns: mean over exemplars of the crop similarity (exemplar crops
/// come from `subject.masks`). Background columns: similarity of the two
/// backgrounds, each cut with its own mask.
AutoMetrics score_example(const Image& generated, const SubjectSet& subject, const Image& source, const Mask& gen_mask,
                          const Mask& src_mask, const EmbedderPair& embedders);

/// Mean over examples of the per-example geometric mean; throws EmptyList.
double overall_auto(std::span<const AutoMetrics> per_example);

inline constexpr double kZeroAspectSubstitute = 0.001;

/// Geometric mean of the three averaged aspects, zeros replaced by 0.001.
double overall_human(double subject, double background, double realistic);

enum class Difficulty { Easy, Hard };
std::string_view to_string(Difficulty d);
Difficulty difficulty_from_string(std::string_view name);

struct LabeledResult {
    std::string id;
    std::optional<Difficulty> label;
    AutoMetrics metrics;
};

struct SplitStats {
    int count = 0;
    double overall = 0.0;
    AutoMetrics mean;
};

struct SplitReport {
    std::optional<SplitStats> easy;
    std::optional<SplitStats> hard;
    /// easy - hard, present only when both splits are.
    std::optional<double> gap;
};

/// Throws UnlabeledResult when any entry lacks a label.
SplitReport split_report(std::span<const LabeledResult> results);

nlohmann::json to_json(const SplitReport& r);
/// Aligned plain-text table.
std::string format_split_table(const SplitReport& r);

} // namespace dreamedit
