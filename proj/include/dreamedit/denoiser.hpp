// Copyright (C) 2026 The DreamEdit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "dreamedit/image.hpp"
#include "dreamedit/masking.hpp"
#include "dreamedit/nn.hpp"
#include "dreamedit/schedule.hpp"
#include "dreamedit/unet.hpp"
#include "dreamedit/vocab.hpp"

namespace dreamedit {

/// Pooled prompt embedding fed to every conditioning site.
using ConditionVector = std::vector<float>;

/// Model state in CHW layout, pixel values shifted to [-1, 1].
using State = std::vector<float>;

State image_to_state(const Image& image);
Image state_to_image(std::span<const float> state, int width, int height);

/// Weights of the noise predictor, including the token table. The network
/// outputs the velocity v = sqrt(abar) eps - sqrt(1 - abar) x; noise predictions
/// are recovered as eps = sqrt(1 - abar) z + sqrt(abar) v under `schedule`.
struct DenoiserParams {
    ModelConfig config;
    nn::ParamStore<float> store;
    NoiseSchedule schedule;
    /// Special tokens (subject / background) fine-tuned into these weights.
    std::vector<int> bound_tokens;

    bool is_bound(int token) const;

    std::uint64_t architecture_hash() const;
    std::size_t parameter_count() const;
    /// Hash of the weight values, for provenance records.
    std::uint64_t weights_hash() const;
};

ModelConfig default_model_config(int image_size = 64, int timesteps = 100);

DenoiserParams init_params(const ModelConfig& config, std::uint64_t seed);

/// Versioned binary file: magic, version, architecture hash, config JSON, raw weights.
void save_params(const std::filesystem::path& path, const DenoiserParams& params);
/// Throws ArchitectureMismatch when `expected_hash` is given and differs.
DenoiserParams load_params(const std::filesystem::path& path, std::uint64_t expected_hash = 0);

ConditionVector encode_prompt(const DenoiserParams& params, const PromptTokens& tokens);

State predict_noise(const DenoiserParams& params, std::span<const float> z, int t, const ConditionVector& cond);

/// (1 - scale) * eps_null + scale * eps_cond, i.e. eps_null + scale * (eps_cond - eps_null).
State guided_noise(const DenoiserParams& params, std::span<const float> z, int t, const ConditionVector& cond,
                   const ConditionVector& null_cond, float scale);

struct TrainingPair {
    Image image;
    PromptTokens prompt;
};

/// Exemplars of one subject, each prompt containing the subject token once.
struct SubjectSet {
    int class_id = 0;
    std::vector<Image> images;
    std::vector<PromptTokens> prompts;
    /// Optional ground-truth subject masks (one per image) from the generator.
    std::vector<Mask> masks;

    /// Throws InvalidParameter when the invariants do not hold.
    void validate() const;
};

enum class Optimizer { Adam, Sgd };

struct TrainConfig {
    int steps = 2000;
    int batch = 8;
    double learning_rate = 2e-3;
    Optimizer optimizer = Optimizer::Adam;
    /// 0 gives a momentum-free adaptive step (RMS-normalized, bias-corrected).
    double beta1 = 0.0;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    double grad_clip = 1.0;
    double cond_dropout = 0.1;
    std::uint64_t seed = 7;
    /// Keep the token table fixed (alternative subject-binding mode).
    bool freeze_embeddings = false;
    /// Fraction of each batch drawn from `prior` pairs during binding.
    bool prior_preservation = false;
    double prior_fraction = 0.5;
    /// Called every `log_every` steps with (step, smoothed loss) when set.
    std::function<void(int, double)> on_progress;
    int log_every = 100;
};

nlohmann::json to_json(const TrainConfig& cfg);

struct TrainResult {
    DenoiserParams params;
    std::vector<float> loss_curve;
};

/// Minimizes E ||v - v_theta(z_t, t, Gamma(Q))||^2 from a seeded initialization.
TrainResult train_base(std::span<const TrainingPair> dataset, const NoiseSchedule& schedule, const ModelConfig& model,
                       const TrainConfig& cfg);

/// Same objective continued from `init`; `init` with 0 steps is returned unchanged.
TrainResult train_from(const DenoiserParams& init, std::span<const TrainingPair> dataset, const NoiseSchedule& schedule,
                       const TrainConfig& cfg, std::span<const TrainingPair> prior = {});

/// Fine-tunes every weight on the subject exemplars (no dropout by default).
TrainResult bind_subject(const DenoiserParams& params, const SubjectSet& subject, const NoiseSchedule& schedule,
                         TrainConfig cfg, std::span<const TrainingPair> extra = {},
                         std::span<const TrainingPair> prior = {});

TrainConfig default_bind_config();

/// Mean over the last `window` entries divided by the mean over the first `window`.
double smoothed(std::span<const float> curve, int begin, int window);

/// Loss and gradient of one batch against the velocity target; exposed for
/// gradient checks.
template <typename S>
double denoising_loss(nn::NoisePredictor<S>& net, const nn::ParamStore<S>& p, nn::ParamStore<S>* grad,
                      const nn::Tensor<S>& z, std::span<const int> t, std::span<const std::vector<int>> prompts,
                      const nn::Tensor<S>& target) {
    const nn::Tensor<S> cond = net.encode(p, prompts);
    const nn::Tensor<S> pred = net.forward(p, z, t, cond);
    double loss = 0.0;
    nn::Tensor<S> d(pred.c, pred.n, pred.h, pred.w);
    const S scale = S(2) / static_cast<S>(pred.size());
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const S diff = pred.data[i] - target.data[i];
        loss += static_cast<double>(diff) * static_cast<double>(diff);
        d.data[i] = scale * diff;
    }
    loss /= static_cast<double>(pred.size());
    if (grad != nullptr) {
        const nn::Tensor<S> dcond = net.backward(p, *grad, d);
        net.encode_backward(*grad, dcond);
    }
    return loss;
}

} // namespace dreamedit
