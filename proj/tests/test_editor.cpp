// Copyright (C) 2026 The DreamEdit Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cmath>

#include "dreamedit/bench.hpp"
#include "dreamedit/editor.hpp"
#include "dreamedit/error.hpp"
#include "helpers.hpp"

using namespace dreamedit;
using namespace dreamedit::testing;

namespace {

const Bench& small_bench() {
    static const Bench bench = [] {
        BenchConfig cfg;
        cfg.classes = 2;
        cfg.tasks_per_class = 3;
        cfg.exemplars = 2;
        return generate_bench(cfg);
    }();
    return bench;
}

const DenoiserParams& model() {
    static const DenoiserParams p = untrained_bound_model(64, 100, 17);
    return p;
}

const BenchTask& find_task(TaskKind kind) {
    for (const auto& t : small_bench().tasks)
        if (t.task.kind == kind) return t;
    throw std::runtime_error("no task of the requested kind");
}

NoiseFn wavy_eps() {
    return [](std::span<const float> z, int t, const ConditionVector& c) {
        State e(z.size());
        for (std::size_t i = 0; i < z.size(); ++i) e[i] = 0.3f * std::sin(2.0f * z[i] + 0.05f * t + c[0]);
        return e;
    };
}

float max_outside(const Image& a, const Image& b, const Mask& m) {
    float worst = 0.0f;
    for (int y = 0; y < a.height; ++y)
        for (int x = 0; x < a.width; ++x)
            if (!m.at(x, y))
                for (int c = 0; c < 3; ++c) worst = std::max(worst, std::abs(a.at(x, y, c) - b.at(x, y, c)));
    return worst;
}

} // namespace

TEST_SUITE("editor") {

TEST_CASE("blend_latents degenerate masks and checkerboard oracle") {
    const State x = random_vector(3 * 8 * 6, 1), z = random_vector(3 * 8 * 6, 2);
    CHECK(blend_latents(x, z, Mask(8, 6, false)) == x);
    CHECK(blend_latents(x, z, Mask(8, 6, true)) == z);
    Mask cb(8, 6);
    for (int y = 0; y < 6; ++y)
        for (int xx = 0; xx < 8; ++xx) cb.set(xx, y, (xx + y) % 2 == 0);
    const State b = blend_latents(x, z, cb);
    for (int c = 0; c < 3; ++c)
        for (int y = 0; y < 6; ++y)
            for (int xx = 0; xx < 8; ++xx) {
                const std::size_t i = static_cast<std::size_t>(c) * 48 + y * 8 + xx;
                CHECK(b[i] == ((xx + y) % 2 == 0 ? z[i] : x[i]));
            }
    CHECK_THROWS_AS(blend_latents(x, z, Mask(4, 4)), Error);
}

TEST_CASE("inpaint_once with empty and full masks") {
    const NoiseSchedule s = build_schedule(ScheduleFamily::LinearBeta, 50);
    const Image x0 = quantize8(random_image(16, 16, 3));
    const ConditionVector cond{0.7f}, null{0.0f};
    const NoiseFn eps = wavy_eps();
    CHECK(inpaint_once(eps, s, x0, Mask(16, 16, false), cond, null, 40, 2.0f) == x0);

    const Image full = inpaint_once(eps, s, x0, Mask(16, 16, true), cond, null, 40, 2.0f);
    const LatentTrajectory traj = ddim_encode(eps, image_to_state(x0), 40, s, null);
    const Image plain = state_to_image(ddim_sample(eps, traj.states[40], 40, s, cond, null, 2.0f), 16, 16);
    CHECK(full == plain);
    CHECK(max_abs_diff(full, x0) > 0.0f);

    CHECK_THROWS_AS(inpaint_once(eps, s, x0, Mask(16, 16, true), cond, null, 0, 2.0f), Error);
    CHECK_THROWS_AS(inpaint_once(eps, s, x0, Mask(16, 16, true), cond, null, 51, 2.0f), Error);
}

TEST_CASE("inpaint_once keeps unmasked pixels exactly") {
    const NoiseSchedule s = build_schedule(ScheduleFamily::LinearBeta, 30);
    const Image x0 = quantize8(random_image(16, 16, 4));
    const Mask m = dilate(random_mask(16, 16, 0.05, 5), 3);
    const Image out = inpaint_once(wavy_eps(), s, x0, m, {0.4f}, {0.0f}, 25, 3.0f);
    CHECK(max_outside(out, x0, m) == 0.0f);
}

TEST_CASE("initialization strategies") {
    const BenchTask& rep = find_task(TaskKind::Replace);
    const BenchTask& add = find_task(TaskKind::Add);
    const SubjectSet& subj = small_bench().subject_for(rep.task.class_id).set;
    const ColorSegmenter seg;
    const EditContext ctx{&model(), &model().schedule, &seg};

    EditConfig cfg;
    CHECK(initialize(rep.task, subj, cfg, ctx) == rep.task.source);

    cfg.init = InitStrategy::Copy;
    const Image copied = initialize(rep.task, subj, cfg, ctx);
    const Mask cut = seg.segment(subj.images[0], subj.class_id);
    const Bbox region = bbox_of(seg.segment(rep.task.source, rep.task.class_id));
    CHECK(copied == copy_paste(rep.task.source, region, subj.images[0], cut).image);
    CHECK(copied == baseline_copypaste(rep.task, subj, seg));

    const SubjectSet& add_subj = small_bench().subject_for(add.task.class_id).set;
    cfg.init = InitStrategy::ExemplarInfill;
    const Image infilled = initialize(add.task, add_subj, cfg, ctx);
    CHECK(max_outside(infilled, add.task.source, mask_from_bbox(64, 64, *add.task.bbox)) == 0.0f);

    CHECK_THROWS_AS(initialize(rep.task, subj, cfg, ctx), Error);
    cfg.init = InitStrategy::None;
    try {
        initialize(add.task, add_subj, cfg, ctx);
        FAIL("expected an invalid strategy");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::InvalidStrategy);
    }
}

TEST_CASE("dream_edit schedule, background preservation and prefix property") {
    const ColorSegmenter seg;
    const EditContext ctx{&model(), &model().schedule, &seg};
    for (const TaskKind kind : {TaskKind::Replace, TaskKind::Add}) {
        const BenchTask& bt = find_task(kind);
        const SubjectSet& subj = small_bench().subject_for(bt.task.class_id).set;
        EditConfig cfg;
        cfg.init = kind == TaskKind::Replace ? InitStrategy::None : InitStrategy::ExemplarInfill;
        const EditRun run = dream_edit(bt.task, subj, cfg, ctx);
        REQUIRE_MESSAGE(run.complete(), run.failure.value_or(""));
        REQUIRE(run.iterations.size() == 5);
        std::vector<int> depths;
        Mask ever(64, 64);
        for (const auto& it : run.iterations) {
            depths.push_back(it.depth);
            CHECK(it.dilated.contains(it.mask));
            CHECK(max_outside(it.output, it.input, it.dilated) <= 1e-5f);
            for (std::size_t i = 0; i < ever.bits.size(); ++i) ever.bits[i] |= it.dilated.bits[i];
        }
        CHECK(depths == std::vector<int>{80, 70, 60, 50, 40});
        CHECK(max_outside(run.iterations.back().output, run.initial, ever) <= 1e-5f);
        if (kind == TaskKind::Replace) CHECK(run.initial == bt.task.source);

        EditConfig one = cfg;
        one.iterations = 1;
        const EditRun single = dream_edit(bt.task, subj, one, ctx);
        REQUIRE(single.complete());
        CHECK(single.iterations[0].output == run.iterations[0].output);
        const Image x1 = initialize(bt.task, subj, one, ctx);
        const Image composed = inpaint_once(model(), model().schedule, x1, dilate(seg.segment(x1, bt.task.class_id), 3),
                                            bt.task.target_prompt, 80, one.guidance_scale);
        CHECK(single.iterations[0].output == composed);
    }
}

TEST_CASE("dream_edit failures are recorded") {
    const BenchTask& bt = find_task(TaskKind::Replace);
    const SubjectSet& subj = small_bench().subject_for(bt.task.class_id).set;
    const ColorSegmenter seg;
    const DenoiserParams unbound = init_params(default_model_config(64, 100), 2);
    const EditRun a = dream_edit(bt.task, subj, EditConfig{}, EditContext{&unbound, &unbound.schedule, &seg});
    REQUIRE(a.failure.has_value());
    CHECK(a.failure->find(to_string(ErrorKind::UnboundToken)) != std::string::npos);

    const SubjectSet& other = small_bench().subject_for(1 - bt.task.class_id).set;
    const EditRun b = dream_edit(bt.task, other, EditConfig{}, EditContext{&model(), &model().schedule, &seg});
    REQUIRE(b.failure.has_value());
    CHECK(b.failure->find(to_string(ErrorKind::ClassMismatch)) != std::string::npos);
    CHECK(b.iterations.empty());
}

TEST_CASE("select_best") {
    CHECK(select_best(std::vector<double>{0.1, 0.2, 0.3, 0.4, 0.5}) == 4);
    CHECK(select_best(std::vector<double>{0.3, 0.3, 0.3}) == 0);
    CHECK(select_best(std::vector<double>{0.2, 0.7, 0.7, 0.1}) == 1);
    CHECK_THROWS_AS(select_best(std::vector<double>{}), Error);
    Rng rng(3);
    for (int trial = 0; trial < 50; ++trial) {
        std::vector<double> v(1 + trial % 7);
        for (auto& x : v) x = std::round(rng.uniform() * 4) / 4;
        int oracle = 0;
        for (int i = 0; i < static_cast<int>(v.size()); ++i)
            if (v[i] > v[oracle]) oracle = i;
        CHECK(select_best(v) == oracle);
    }
}

TEST_CASE("baseline_dreambooth is deterministic and needs both tokens") {
    const DenoiserParams small = untrained_bound_model(32, 10, 5);
    const PromptTokens prompt = PromptTokens::parse("a <v> ball in <y> background");
    const Image a = baseline_dreambooth(small, small.schedule, prompt, 9, 2.0f);
    CHECK(a == baseline_dreambooth(small, small.schedule, prompt, 9, 2.0f));
    CHECK_FALSE(a == baseline_dreambooth(small, small.schedule, prompt, 10, 2.0f));
    CHECK_THROWS_AS(baseline_dreambooth(small, small.schedule, PromptTokens::parse("a <v> ball"), 9, 2.0f), Error);
    DenoiserParams only_subject = small;
    only_subject.bound_tokens = {Vocabulary::instance().subject_token()};
    CHECK_THROWS_AS(baseline_dreambooth(only_subject, small.schedule, prompt, 9, 2.0f), Error);
}

TEST_CASE("edit config JSON round trip and validation") {
    EditConfig c;
    c.iterations = 3;
    c.guidance_scale = 4.5f;
    c.init = InitStrategy::Copy;
    c.ratio.literal = true;
    const EditConfig r = edit_config_from_json(to_json(c));
    CHECK(to_json(r) == to_json(c));
    c.iterations = 0;
    CHECK_THROWS_AS(c.validate(TaskKind::Replace), Error);
}

TEST_CASE("describe_color follows the exemplar hue") {
    const ColorSegmenter seg;
    for (const auto& s : small_bench().subjects) {
        const std::string_view word = describe_color(s.set, seg);
        CHECK(word == color_word_for(s.identity.hue));
    }
}

}
