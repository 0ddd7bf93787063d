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
#include "dreamedit/sampler.hpp"
#include "dreamedit/schedule.hpp"

namespace dreamedit {

enum class TaskKind { Replace, Add };
enum class InitStrategy { None, Copy, ExemplarInfill };

std::string_view to_string(TaskKind kind);
std::string_view to_string(InitStrategy strategy);
TaskKind task_kind_from_string(std::string_view name);
InitStrategy init_strategy_from_string(std::string_view name);

struct EditTask {
    std::string id;
    TaskKind kind = TaskKind::Replace;
    Image source;
    int class_id = 0;
    /// Placement box, Add tasks only.
    std::optional<Bbox> bbox;
    /// Target prompt containing the subject token.
    PromptTokens target_prompt;

    void validate() const;
};

/// Target prompt "a <v> {class}".
PromptTokens subject_prompt(int class_id);

struct EditConfig {
    int iterations = 5;
    int dilation = 3;
    EncodeRatioConfig ratio;
    float guidance_scale = 2.0f;
    InitStrategy init = InitStrategy::None;
    std::uint64_t seed = 0;
    /// Exemplar segmented by the COPY strategy.
    int copy_exemplar = 0;
    /// Encoding ratio of the confined pass after the exemplar paste.
    double infill_ratio = 0.5;

    /// Throws InvalidParameter / InvalidStrategy.
    void validate(TaskKind kind) const;
};

nlohmann::json to_json(const EditConfig& cfg);
EditConfig edit_config_from_json(const nlohmann::json& j, EditConfig defaults = {});

struct IterationRecord {
    int index = 0;  // 1-based
    Image input;
    Mask mask;
    Mask dilated;
    int depth = 0;
    Image output;
    /// True when segmentation failed and the previous dilated mask was reused.
    bool mask_reused = false;
};

struct EditRun {
    std::string task_id;
    TaskKind kind = TaskKind::Replace;
    EditConfig config;
    Image initial;
    std::vector<IterationRecord> iterations;
    nlohmann::json provenance;
    std::optional<std::string> failure;

    bool complete() const { return !failure && static_cast<int>(iterations.size()) == config.iterations; }
};

/// Everything the edit loop reads besides the task.
struct EditContext {
    const DenoiserParams* params = nullptr;  // bound to the task's subject
    const NoiseSchedule* schedule = nullptr;
    const Segmenter* segmenter = nullptr;
};

/// x_0^(1) for the chosen strategy.
Image initialize(const EditTask& task, const SubjectSet& subject, const EditConfig& cfg, const EditContext& ctx);

/// (1 - M) * x_t + M * z_t with the mask broadcast over channels.
State blend_latents(std::span<const float> x_t, std::span<const float> z_t, const Mask& dilated);

/// One masked regeneration pass: encode to depth k under the null prompt, then
/// sample back under `prompt`, re-imposing the recorded states outside the mask.
Image inpaint_once(const NoiseFn& eps, const NoiseSchedule& schedule, const Image& x0, const Mask& dilated,
                   const ConditionVector& prompt, const ConditionVector& null_prompt, int k, float guidance_scale);
Image inpaint_once(const DenoiserParams& params, const NoiseSchedule& schedule, const Image& x0, const Mask& dilated,
                   const PromptTokens& prompt, int k, float guidance_scale);

/// Iterative edit loop. Errors stop the loop and are recorded in `failure`.
EditRun dream_edit(const EditTask& task, const SubjectSet& subject, const EditConfig& cfg, const EditContext& ctx);

/// Argmax with ties resolved toward the smaller index.
int select_best(std::span<const double> scores);

/// Plain generation from noise with a prompt carrying both special tokens.
Image baseline_dreambooth(const DenoiserParams& params, const NoiseSchedule& schedule, const PromptTokens& prompt,
                          std::uint64_t seed, float guidance_scale);

/// The COPY initialization output used as a baseline on its own.
Image baseline_copypaste(const EditTask& task, const SubjectSet& subject, const Segmenter& segmenter,
                         int exemplar = 0);

/// Class prototype sprite on a neutral canvas, with its mask.
struct Prototype {
    Image image;
    Mask mask;
};
Prototype class_prototype(int class_id, int size, float hue);

/// Colour word describing the exemplars: the bucket of the saturation-weighted
/// circular mean hue over the subject pixels. Uses `subject.masks` when present.
std::string_view describe_color(const SubjectSet& subject, const Segmenter& segmenter);

} // namespace dreamedit
