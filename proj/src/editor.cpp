// Copyright (C) 2026 The DreamEdit Authors
// SPDX-License-Identifier: Apache-2.0

#include "dreamedit/editor.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>

#include "dreamedit/error.hpp"
#include "dreamedit/rng.hpp"
#include "dreamedit/scene.hpp"

namespace dreamedit {

namespace {

std::string hex(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

void check_context(const EditContext& ctx) {
    require(ctx.params != nullptr && ctx.schedule != nullptr && ctx.segmenter != nullptr, ErrorKind::InvalidParameter,
            "edit context is incomplete");
}

PromptTokens class_prompt(int class_id, std::string_view color) {
    return PromptTokens::parse("a " + std::string(color) + " " + std::string(classes().at(class_id).name));
}

} // namespace

std::string_view to_string(TaskKind kind) { return kind == TaskKind::Replace ? "replace" : "add"; }

std::string_view to_string(InitStrategy strategy) {
    switch (strategy) {
    case InitStrategy::None: return "none";
    case InitStrategy::Copy: return "copy";
    case InitStrategy::ExemplarInfill: return "exemplar_infill";
    }
    return "none";
}

TaskKind task_kind_from_string(std::string_view name) {
    if (name == "replace") return TaskKind::Replace;
    if (name == "add") return TaskKind::Add;
    fail(ErrorKind::InvalidParameter, "unknown task kind '" + std::string(name) + "'");
}

InitStrategy init_strategy_from_string(std::string_view name) {
    for (InitStrategy s : {InitStrategy::None, InitStrategy::Copy, InitStrategy::ExemplarInfill})
        if (to_string(s) == name) return s;
    fail(ErrorKind::InvalidStrategy, "unknown initialization '" + std::string(name) + "'");
}

void EditTask::validate() const {
    require(class_id >= 0 && class_id < kClassCount, ErrorKind::InvalidParameter, "class id out of range");
    require(source.width > 0 && source.height > 0, ErrorKind::InvalidParameter, "task " + id + " has no source image");
    if (kind == TaskKind::Add) {
        require(bbox.has_value() && bbox->inside(source.width, source.height), ErrorKind::InvalidParameter,
                "add task " + id + " needs a bbox inside the image");
    } else {
        require(!bbox.has_value(), ErrorKind::InvalidParameter, "replace task " + id + " must not carry a bbox");
    }
    target_prompt.validate();
    require(target_prompt.contains(Vocabulary::instance().subject_token()), ErrorKind::InvalidParameter,
            "target prompt lacks the subject token");
}

PromptTokens subject_prompt(int class_id) {
    return PromptTokens::parse("a <v> " + std::string(classes().at(class_id).name));
}

void EditConfig::validate(TaskKind kind) const {
    require(iterations >= 1, ErrorKind::InvalidParameter, "iterations must be >= 1");
    require(dilation >= 1, ErrorKind::InvalidParameter, "dilation kernel must be >= 1");
    require(ratio.first > 0.0 && ratio.first <= 1.0, ErrorKind::InvalidParameter, "first ratio must be in (0, 1]");
    require(guidance_scale >= 0.0f, ErrorKind::InvalidParameter, "guidance scale must be >= 0");
    require(infill_ratio > 0.0 && infill_ratio <= 1.0, ErrorKind::InvalidParameter, "infill ratio must be in (0, 1]");
    require(copy_exemplar >= 0, ErrorKind::InvalidParameter, "exemplar index must be >= 0");
    if (init == InitStrategy::None)
        require(kind == TaskKind::Replace, ErrorKind::InvalidStrategy, "add tasks need an initialization");
    if (init == InitStrategy::ExemplarInfill)
        require(kind == TaskKind::Add, ErrorKind::InvalidStrategy, "exemplar infill applies to add tasks only");
}

nlohmann::json to_json(const EditConfig& c) {
    return {{"iterations", c.iterations},       {"dilation", c.dilation},         {"first_ratio", c.ratio.first},
            {"ratio_step", c.ratio.step},       {"ratio_floor", c.ratio.floor},   {"literal_ratio", c.ratio.literal},
            {"guidance_scale", c.guidance_scale}, {"init", to_string(c.init)},     {"seed", c.seed},
            {"copy_exemplar", c.copy_exemplar}, {"infill_ratio", c.infill_ratio}};
}

EditConfig edit_config_from_json(const nlohmann::json& j, EditConfig c) {
    c.iterations = j.value("iterations", c.iterations);
    c.dilation = j.value("dilation", c.dilation);
    c.ratio.first = j.value("first_ratio", c.ratio.first);
    c.ratio.step = j.value("ratio_step", c.ratio.step);
    c.ratio.floor = j.value("ratio_floor", c.ratio.floor);
    c.ratio.literal = j.value("literal_ratio", c.ratio.literal);
    c.guidance_scale = j.value("guidance_scale", c.guidance_scale);
    if (j.contains("init")) c.init = init_strategy_from_string(j.at("init").get<std::string>());
    c.seed = j.value("seed", c.seed);
    c.copy_exemplar = j.value("copy_exemplar", c.copy_exemplar);
    c.infill_ratio = j.value("infill_ratio", c.infill_ratio);
    return c;
}

Prototype class_prototype(int class_id, int size, float hue) {
    const ClassInfo& info = classes().at(class_id);
    SubjectSpec s;
    s.class_id = class_id;
    s.shape = info.shape;
    s.pattern = info.pattern;
    s.hue = hue;
    s.size = size * 3 / 4;
    s.x = s.y = (size - s.size) / 2;
    Prototype p{Image(size, size, 0.5f), Mask(size, size)};
    draw_subject(p.image, &p.mask, s);
    return p;
}

std::string_view describe_color(const SubjectSet& subject, const Segmenter& segmenter) {
    require(!subject.images.empty(), ErrorKind::EmptyList, "subject set has no exemplars");
    double sx = 0.0, sy = 0.0;
    for (std::size_t i = 0; i < subject.images.size(); ++i) {
        const Image& img = subject.images[i];
        const Mask mask = i < subject.masks.size() ? subject.masks[i] : segmenter.segment(img, subject.class_id);
        for (int y = 0; y < img.height; ++y) {
            for (int x = 0; x < img.width; ++x) {
                if (!mask.at(x, y)) continue;
                const Rgb c = img.rgb(x, y);
                const float hi = std::max({c[0], c[1], c[2]}), lo = std::min({c[0], c[1], c[2]});
                if (hi <= lo) continue;
                const float d = hi - lo;
                float h = hi == c[0] ? std::fmod((c[1] - c[2]) / d, 6.0f) : hi == c[1] ? (c[2] - c[0]) / d + 2.0f
                                                                                       : (c[0] - c[1]) / d + 4.0f;
                h *= 60.0f;
                const double w = d / hi;  // saturation
                sx += w * std::cos(h * std::numbers::pi / 180.0);
                sy += w * std::sin(h * std::numbers::pi / 180.0);
            }
        }
    }
    require(sx != 0.0 || sy != 0.0, ErrorKind::DegenerateRegion, "exemplars carry no hue");
    double hue = std::atan2(sy, sx) * 180.0 / std::numbers::pi;
    if (hue < 0) hue += 360.0;
    return color_word_for(static_cast<float>(hue));
}

State blend_latents(std::span<const float> x_t, std::span<const float> z_t, const Mask& dilated) {
    const std::size_t plane = static_cast<std::size_t>(dilated.width) * dilated.height;
    require(x_t.size() == z_t.size() && x_t.size() == 3 * plane, ErrorKind::ShapeMismatch,
            "blend operands differ in shape");
    State out(x_t.size());
    for (std::size_t c = 0; c < 3; ++c)
        for (std::size_t i = 0; i < plane; ++i) out[c * plane + i] = dilated.bits[i] ? z_t[c * plane + i] : x_t[c * plane + i];
    return out;
}

namespace {

Image inpaint_guided(const NoiseFn& encode_eps, const GuidedNoiseFn& sample_eps, const NoiseSchedule& schedule,
                     const Image& x0, const Mask& dilated, const ConditionVector& null_prompt, int k) {
    require(k >= 1 && k <= schedule.steps(), ErrorKind::DepthOutOfRange, "k=" + std::to_string(k));
    require(dilated.width == x0.width && dilated.height == x0.height, ErrorKind::ShapeMismatch,
            "mask does not match the image");
    const LatentTrajectory traj = ddim_encode(encode_eps, image_to_state(x0), k, schedule, null_prompt);
    State z = traj.states[k];
    for (int t = k; t >= 1; --t) {
        z = ddim_step(z, t, sample_eps(z, t), schedule);
        if (t > 1) z = blend_latents(traj.states[t - 1], z, dilated);
    }
    for (auto& v : z) v = std::clamp(v, -1.0f, 1.0f);
    // Final blend in pixel space so unmasked pixels are copied verbatim.
    const Image generated = state_to_image(z, x0.width, x0.height);
    Image out = x0;
    for (int y = 0; y < x0.height; ++y)
        for (int x = 0; x < x0.width; ++x)
            if (dilated.at(x, y)) out.set(x, y, generated.rgb(x, y));
    return out;
}

} // namespace

Image inpaint_once(const NoiseFn& eps, const NoiseSchedule& schedule, const Image& x0, const Mask& dilated,
                   const ConditionVector& prompt, const ConditionVector& null_prompt, int k, float guidance_scale) {
    return inpaint_guided(eps, guided(eps, prompt, null_prompt, guidance_scale), schedule, x0, dilated, null_prompt, k);
}

Image inpaint_once(const DenoiserParams& params, const NoiseSchedule& schedule, const Image& x0, const Mask& dilated,
                   const PromptTokens& prompt, int k, float guidance_scale) {
    const ConditionVector null_cond = encode_prompt(params, PromptTokens::null());
    return inpaint_guided(network_noise(params), guided(params, encode_prompt(params, prompt), null_cond, guidance_scale),
                          schedule, x0, dilated, null_cond, k);
}

Image initialize(const EditTask& task, const SubjectSet& subject, const EditConfig& cfg, const EditContext& ctx) {
    cfg.validate(task.kind);
    switch (cfg.init) {
    case InitStrategy::None: return task.source;
    case InitStrategy::Copy: {
        require(ctx.segmenter != nullptr, ErrorKind::InvalidParameter, "COPY needs a segmenter");
        return baseline_copypaste(task, subject, *ctx.segmenter, cfg.copy_exemplar);
    }
    case InitStrategy::ExemplarInfill: {
        check_context(ctx);
        const std::string_view color = describe_color(subject, *ctx.segmenter);
        float hue = 0.0f;
        for (const auto& w : color_words())
            if (w.name == color) hue = w.hue;
        const Prototype proto = class_prototype(task.class_id, task.source.width, hue);
        const Image pasted = copy_paste(task.source, *task.bbox, proto.image, proto.mask).image;
        const int k = std::max(1, static_cast<int>(std::lround(ctx.schedule->steps() * cfg.infill_ratio)));
        return inpaint_once(*ctx.params, *ctx.schedule, pasted, mask_from_bbox(pasted.width, pasted.height, *task.bbox),
                            class_prompt(task.class_id, color), k, cfg.guidance_scale);
    }
    }
    fail(ErrorKind::InvalidStrategy, "unknown initialization");
}

Image baseline_copypaste(const EditTask& task, const SubjectSet& subject, const Segmenter& segmenter, int exemplar) {
    task.validate();
    require(exemplar >= 0 && exemplar < static_cast<int>(subject.images.size()), ErrorKind::InvalidParameter,
            "exemplar index out of range");
    const Image& source_img = subject.images[exemplar];
    const Mask cut = segment_subject(source_img, subject.class_id, segmenter);
    const Bbox region = task.kind == TaskKind::Add ? *task.bbox : bbox_of(segment_subject(task.source, task.class_id, segmenter));
    return copy_paste(task.source, region, source_img, cut).image;
}

EditRun dream_edit(const EditTask& task, const SubjectSet& subject, const EditConfig& cfg, const EditContext& ctx) {
    EditRun run;
    run.task_id = task.id;
    run.kind = task.kind;
    run.config = cfg;
    try {
        check_context(ctx);
        task.validate();
        cfg.validate(task.kind);
        subject.validate();
        require(subject.class_id == task.class_id, ErrorKind::ClassMismatch, "subject set is of another class");
        const DenoiserParams& params = *ctx.params;
        require(params.is_bound(Vocabulary::instance().subject_token()), ErrorKind::UnboundToken,
                "model has no bound subject token");
        run.provenance = {{"architecture_hash", hex(params.architecture_hash())},
                          {"weights_hash", hex(params.weights_hash())},
                          {"schedule", to_json(*ctx.schedule)},
                          {"segmenter", to_string(ctx.segmenter->provenance())},
                          {"seed", cfg.seed}};

        Image x = initialize(task, subject, cfg, ctx);
        run.initial = x;
        Mask previous;
        for (int i = 1; i <= cfg.iterations; ++i) {
            IterationRecord rec;
            rec.index = i;
            rec.input = x;
            try {
                rec.mask = segment_subject(x, task.class_id, *ctx.segmenter);
                rec.dilated = dilate(rec.mask, cfg.dilation);
            } catch (const Error& e) {
                if (i == 1 || (e.kind() != ErrorKind::SubjectNotFound && e.kind() != ErrorKind::EmptyMask)) throw;
                rec.mask = Mask(x.width, x.height);
                rec.dilated = previous;
                rec.mask_reused = true;
            }
            rec.depth = encode_ratio(i, ctx.schedule->steps(), cfg.ratio);
            rec.output = inpaint_once(params, *ctx.schedule, x, rec.dilated, task.target_prompt, rec.depth,
                                      cfg.guidance_scale);
            x = rec.output;
            previous = rec.dilated;
            run.iterations.push_back(std::move(rec));
        }
    } catch (const Error& e) {
        run.failure = e.what();
    }
    return run;
}

int select_best(std::span<const double> scores) {
    require(!scores.empty(), ErrorKind::EmptyList, "no scores to select from");
    int best = 0;
    for (int i = 1; i < static_cast<int>(scores.size()); ++i)
        if (scores[i] > scores[best]) best = i;
    return best;
}

Image baseline_dreambooth(const DenoiserParams& params, const NoiseSchedule& schedule, const PromptTokens& prompt,
                          std::uint64_t seed, float guidance_scale) {
    prompt.validate();
    const auto& vocab = Vocabulary::instance();
    for (int tok : {vocab.subject_token(), vocab.background_token()}) {
        require(prompt.contains(tok), ErrorKind::InvalidParameter, "prompt lacks " + vocab.word(tok));
        require(params.is_bound(tok), ErrorKind::UnboundToken, vocab.word(tok) + " is not bound in this model");
    }
    const int size = params.config.image_size;
    Rng rng(seed);
    State z(static_cast<std::size_t>(3) * size * size);
    for (auto& v : z) v = static_cast<float>(rng.normal());
    const ConditionVector null_cond = encode_prompt(params, PromptTokens::null());
    const State out = ddim_sample(guided(params, encode_prompt(params, prompt), null_cond, guidance_scale), z,
                                  schedule.steps(), schedule);
    return state_to_image(out, size, size);
}

} // namespace dreamedit
