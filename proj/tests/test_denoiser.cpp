// Copyright (C) 2026 The DreamEdit Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cmath>

#include "dreamedit/error.hpp"
#include "dreamedit/scene.hpp"
#include "helpers.hpp"

using namespace dreamedit;
using namespace dreamedit::testing;

namespace {

std::vector<TrainingPair> tiny_dataset(int size, int count) {
    std::vector<TrainingPair> data;
    for (int i = 0; i < count; ++i) {
        SceneSpec spec;
        SubjectSpec s;
        s.class_id = i % 2;
        s.hue = 40.0f * i;
        s.size = size / 3;
        s.x = size / 4;
        s.y = size / 4;
        spec.subject = s;
        data.push_back({render_scene(spec, size).image, PromptTokens::parse(i % 2 == 0 ? "a red ball" : "a blue coin")});
    }
    return data;
}

} // namespace

TEST_SUITE("denoiser") {

TEST_CASE("prompt encoding") {
    const DenoiserParams p = init_params(default_model_config(32, 10), 3);
    const ConditionVector null = encode_prompt(p, PromptTokens::null());
    REQUIRE(null.size() == static_cast<std::size_t>(p.config.cond_dim));
    // The token table is the first tensor; the null token is row 0.
    for (int d = 0; d < p.config.cond_dim; ++d) CHECK(null[d] == p.store.tensors[0][d]);
    const PromptTokens q = PromptTokens::parse("a red ball");
    CHECK(encode_prompt(p, q) == encode_prompt(p, q));
    CHECK(encode_prompt(p, q) != encode_prompt(p, PromptTokens::parse("a blue ball")));
    CHECK_THROWS_AS(PromptTokens::parse("a zebra"), Error);
}

TEST_CASE("predict_noise is reproducible and finite") {
    const DenoiserParams a = init_params(default_model_config(32, 10), 5);
    const DenoiserParams b = init_params(default_model_config(32, 10), 5);
    const ConditionVector c = encode_prompt(a, PromptTokens::parse("a <v> coin"));
    State z = random_vector(3 * 32 * 32, 6);
    for (auto& v : z) v = std::clamp(3.0f * v, -3.0f, 3.0f);
    const State e1 = predict_noise(a, z, 7, c);
    CHECK(e1 == predict_noise(b, z, 7, c));
    for (const float v : e1) CHECK(std::isfinite(v));
    CHECK_THROWS_AS(predict_noise(a, z, 11, c), Error);
    CHECK_THROWS_AS(predict_noise(a, State(10, 0.0f), 3, c), Error);
}

TEST_CASE("guided_noise endpoints") {
    const DenoiserParams p = init_params(default_model_config(32, 10), 8);
    const ConditionVector c = encode_prompt(p, PromptTokens::parse("a <v> coin")), n = encode_prompt(p, PromptTokens::null());
    const State z = random_vector(3 * 32 * 32, 9);
    const State ec = predict_noise(p, z, 4, c), en = predict_noise(p, z, 4, n);
    CHECK(guided_noise(p, z, 4, c, n, 0.0f) == en);
    CHECK(guided_noise(p, z, 4, c, n, 1.0f) == ec);
    const State g = guided_noise(p, z, 4, c, n, 3.0f);
    for (std::size_t i = 0; i < z.size(); ++i) CHECK(g[i] == doctest::Approx(en[i] + 3.0f * (ec[i] - en[i])).epsilon(1e-3).scale(1.0));
}

TEST_CASE("analytic gradient matches central finite differences") {
    const ModelConfig cfg = default_model_config(32, 10);
    nn::NoisePredictor<double> net(cfg);
    nn::ParamStore<double> p = init_params(cfg, 13).store.cast<double>();
    // Perturb every weight so zero-initialized output layers do not hide the upstream gradients.
    Rng rng(14);
    for (auto& t : p.tensors)
        for (auto& w : t) w += 0.05 * rng.normal();

    nn::Tensor<double> z(3, 1, 32, 32), target(3, 1, 32, 32);
    for (auto& v : z.data) v = rng.normal();
    for (auto& v : target.data) v = rng.normal();
    const std::vector<int> t{6};
    const std::vector<std::vector<int>> prompts{PromptTokens::parse("a <v> ball").ids};

    auto grad = nn::ParamStore<double>::zeros_like(net.layout());
    denoising_loss<double>(net, p, &grad, z, t, prompts, target);

    int checked = 0;
    while (checked < 20) {
        const int ti = rng.uniform_int(0, static_cast<int>(p.tensors.size()) - 1);
        auto& tensor = p.tensors[ti];
        const int wi = rng.uniform_int(0, static_cast<int>(tensor.size()) - 1);
        // Token-table rows outside the prompt have zero gradient by construction.
        if (ti == 0 && grad.tensors[0][wi] == 0.0) continue;
        const double saved = tensor[wi], h = 1e-5;
        tensor[wi] = saved + h;
        const double up = denoising_loss<double>(net, p, nullptr, z, t, prompts, target);
        tensor[wi] = saved - h;
        const double down = denoising_loss<double>(net, p, nullptr, z, t, prompts, target);
        tensor[wi] = saved;
        const double numeric = (up - down) / (2 * h);
        const double analytic = grad.tensors[ti][wi];
        const double denom = std::max({std::abs(numeric), std::abs(analytic), 1e-7});
        INFO("tensor " << net.layout().specs()[ti].name << " index " << wi);
        CHECK(std::abs(numeric - analytic) / denom <= 1e-3);
        ++checked;
    }
}

TEST_CASE("training: zero steps, determinism, loss decrease") {
    const NoiseSchedule s = build_schedule(ScheduleFamily::LinearBeta, 10);
    const ModelConfig cfg = default_model_config(32, 10);
    const auto data = tiny_dataset(32, 4);
    TrainConfig tc;
    tc.steps = 0;
    const TrainResult none = train_base(data, s, cfg, tc);
    CHECK(none.params.store.tensors == init_params(cfg, tc.seed).store.tensors);

    tc.steps = 60;
    tc.batch = 4;
    const TrainResult a = train_base(data, s, cfg, tc);
    const TrainResult b = train_base(data, s, cfg, tc);
    CHECK(a.params.store.tensors == b.params.store.tensors);
    CHECK(a.loss_curve == b.loss_curve);
    REQUIRE(a.loss_curve.size() == 60);
    CHECK(smoothed(a.loss_curve, 50, 10) < smoothed(a.loss_curve, 0, 10));

    CHECK_THROWS_AS(train_base({}, s, cfg, tc), Error);
    CHECK_THROWS_AS(train_base(data, build_schedule(ScheduleFamily::LinearBeta, 20), cfg, tc), Error);
}

TEST_CASE("bind_subject records the special tokens") {
    const NoiseSchedule s = build_schedule(ScheduleFamily::LinearBeta, 10);
    const DenoiserParams base = init_params(default_model_config(32, 10), 21);
    SubjectSet set;
    set.class_id = 0;
    for (int i = 0; i < 2; ++i) {
        set.images.push_back(random_image(32, 32, 30 + i));
        set.prompts.push_back(PromptTokens::parse("a <v> ball"));
    }
    TrainConfig tc = default_bind_config();
    tc.steps = 0;
    const TrainResult none = bind_subject(base, set, s, tc);
    CHECK(none.params.store.tensors == base.store.tensors);
    CHECK(none.params.bound_tokens.empty());

    tc.steps = 3;
    tc.batch = 2;
    const std::vector<TrainingPair> extra{{random_image(32, 32, 40), PromptTokens::parse("a <y> background")}};
    const TrainResult bound = bind_subject(base, set, s, tc, extra);
    CHECK(bound.params.is_bound(Vocabulary::instance().subject_token()));
    CHECK(bound.params.is_bound(Vocabulary::instance().background_token()));
    CHECK(bound.params.store.tensors != base.store.tensors);

    SubjectSet bad = set;
    bad.prompts[0] = PromptTokens::parse("a ball");
    CHECK_THROWS_AS(bind_subject(base, bad, s, tc), Error);
}

TEST_CASE("parameter files round trip and check the architecture") {
    TempDir dir("params");
    DenoiserParams p = init_params(default_model_config(32, 10), 4);
    p.bound_tokens = {Vocabulary::instance().subject_token()};
    save_params(dir.path() / "p.bin", p);
    const DenoiserParams q = load_params(dir.path() / "p.bin", p.architecture_hash());
    CHECK(q.store.tensors == p.store.tensors);
    CHECK(q.bound_tokens == p.bound_tokens);
    CHECK(q.weights_hash() == p.weights_hash());
    CHECK(q.schedule.steps() == 10);

    const DenoiserParams other = init_params(default_model_config(64, 10), 4);
    CHECK(other.architecture_hash() != p.architecture_hash());
    try {
        load_params(dir.path() / "p.bin", other.architecture_hash());
        FAIL("expected an architecture mismatch");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::ArchitectureMismatch);
    }
    CHECK_THROWS_AS(load_params(dir.path() / "missing.bin"), Error);
}

TEST_CASE("image and state conversions") {
    TempDir dir("png");
    const Image img = quantize8(random_image(17, 9, 2));
    save_png(dir.path() / "a.png", img);
    CHECK(load_png(dir.path() / "a.png") == img);
    const Image back = state_to_image(image_to_state(img), 17, 9);
    CHECK(max_abs_diff(back, img) <= 1e-6f);
}

}
