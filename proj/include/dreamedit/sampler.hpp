// Copyright (C) 2026 The DreamEdit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <functional>
#include <span>
#include <vector>

#include "dreamedit/denoiser.hpp"
#include "dreamedit/schedule.hpp"

namespace dreamedit {

/// Noise predictor signature used by the samplers: (state, t, condition) -> eps.
/// Lets tests substitute analytic predictors for the network.
using NoiseFn = std::function<State(std::span<const float> z, int t, const ConditionVector& cond)>;

NoiseFn network_noise(const DenoiserParams& params);

/// Guided predictor for reverse sampling: (state, t) -> eps with the prompt and
/// guidance scale already bound.
using GuidedNoiseFn = std::function<State(std::span<const float> z, int t)>;

/// (1 - s) * eps(null) + s * eps(cond), skipping the unused branch at s = 0 or 1.
GuidedNoiseFn guided(NoiseFn eps, ConditionVector cond, ConditionVector null_cond, float scale);
/// Network version; both branches run as one batch of two.
GuidedNoiseFn guided(const DenoiserParams& params, ConditionVector cond, ConditionVector null_cond, float scale);

/// Recorded DDIM encoding states x_0 .. x_k.
struct LatentTrajectory {
    std::vector<State> states;
    int depth = 0;
    ConditionVector cond_used;
};

/// Deterministic DDIM inversion from t = 0 to t = k under `cond` (the null
/// prompt by default at the call sites). states[0] is x0 verbatim.
LatentTrajectory ddim_encode(const NoiseFn& eps, std::span<const float> x0, int k, const NoiseSchedule& schedule,
                             const ConditionVector& cond);

/// One deterministic (eta = 0) reverse step from t + 1 to t.
State ddim_step(std::span<const float> z_next, int t_next, std::span<const float> eps_hat, const NoiseSchedule& schedule);

/// One inversion step from t to t + 1.
State ddim_inverse_step(std::span<const float> z, int t, std::span<const float> eps_hat, const NoiseSchedule& schedule);

/// Reverse DDIM from depth k to 0, visiting every integer timestep; clamps to
/// [-1, 1] only at the end.
State ddim_sample(const GuidedNoiseFn& eps, std::span<const float> z_k, int k, const NoiseSchedule& schedule);
State ddim_sample(const NoiseFn& eps, std::span<const float> z_k, int k, const NoiseSchedule& schedule,
                  const ConditionVector& cond, const ConditionVector& null_cond, float guidance_scale);

struct EncodeRatioConfig {
    double first = 0.8;
    double step = 0.1;
    double floor = 0.1;
    /// Literal reading r_i = r_1 - i * step (yields 0.7 at i = 1).
    bool literal = false;
};

/// Encoding depth k_i for iteration i >= 1; never below 1.
int encode_ratio(int iteration, int total_steps, const EncodeRatioConfig& cfg = {});

/// Writes each state as a PNG frame (debugging aid).
void dump_trajectory(const std::filesystem::path& dir, const LatentTrajectory& traj, int image_size);

} // namespace dreamedit
