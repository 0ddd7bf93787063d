// Copyright (C) 2026 The DreamEdit Authors
// SPDX-License-Identifier: Apache-2.0

#include "dreamedit/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "dreamedit/error.hpp"

namespace dreamedit {

NoiseFn network_noise(const DenoiserParams& params) {
    return [&params](std::span<const float> z, int t, const ConditionVector& cond) {
        return predict_noise(params, z, t, cond);
    };
}

GuidedNoiseFn guided(NoiseFn eps, ConditionVector cond, ConditionVector null_cond, float scale) {
    require(scale >= 0.0f, ErrorKind::InvalidParameter, "guidance scale must be >= 0");
    return [eps = std::move(eps), cond = std::move(cond), null_cond = std::move(null_cond), scale](
               std::span<const float> z, int t) {
        if (scale == 1.0f) return eps(z, t, cond);
        State e = eps(z, t, null_cond);
        if (scale == 0.0f) return e;
        const State ec = eps(z, t, cond);
        for (std::size_t i = 0; i < e.size(); ++i) e[i] = (1.0f - scale) * e[i] + scale * ec[i];
        return e;
    };
}

GuidedNoiseFn guided(const DenoiserParams& params, ConditionVector cond, ConditionVector null_cond, float scale) {
    require(scale >= 0.0f, ErrorKind::InvalidParameter, "guidance scale must be >= 0");
    return [&params, cond = std::move(cond), null_cond = std::move(null_cond), scale](std::span<const float> z, int t) {
        return guided_noise(params, z, t, cond, null_cond, scale);
    };
}

State ddim_inverse_step(std::span<const float> z, int t, std::span<const float> eps_hat, const NoiseSchedule& schedule) {
    require(z.size() == eps_hat.size(), ErrorKind::ShapeMismatch, "state and noise differ in size");
    const double a_t = schedule.alpha_bar(t), a_n = schedule.alpha_bar(t + 1);
    const auto scale = static_cast<float>(std::sqrt(a_n / a_t));
    const auto mix = static_cast<float>(std::sqrt(a_n) * (std::sqrt(1.0 / a_n - 1.0) - std::sqrt(1.0 / a_t - 1.0)));
    State out(z.size());
    for (std::size_t i = 0; i < z.size(); ++i) out[i] = scale * z[i] + mix * eps_hat[i];
    return out;
}

State ddim_step(std::span<const float> z_next, int t_next, std::span<const float> eps_hat, const NoiseSchedule& schedule) {
    require(z_next.size() == eps_hat.size(), ErrorKind::ShapeMismatch, "state and noise differ in size");
    const double a_n = schedule.alpha_bar(t_next), a_t = schedule.alpha_bar(t_next - 1);
    const auto scale = static_cast<float>(std::sqrt(a_t / a_n));
    const auto mix = static_cast<float>(std::sqrt(a_t) * (std::sqrt(1.0 / a_t - 1.0) - std::sqrt(1.0 / a_n - 1.0)));
    State out(z_next.size());
    for (std::size_t i = 0; i < z_next.size(); ++i) out[i] = scale * z_next[i] + mix * eps_hat[i];
    return out;
}

LatentTrajectory ddim_encode(const NoiseFn& eps, std::span<const float> x0, int k, const NoiseSchedule& schedule,
                             const ConditionVector& cond) {
    require(k >= 0 && k <= schedule.steps(), ErrorKind::DepthOutOfRange, "k=" + std::to_string(k));
    LatentTrajectory traj;
    traj.depth = k;
    traj.cond_used = cond;
    traj.states.reserve(k + 1);
    traj.states.emplace_back(x0.begin(), x0.end());
    for (int t = 0; t < k; ++t) {
        const State& z = traj.states.back();
        const State e = eps(z, t, cond);
        traj.states.push_back(ddim_inverse_step(z, t, e, schedule));
    }
    return traj;
}

State ddim_sample(const GuidedNoiseFn& eps, std::span<const float> z_k, int k, const NoiseSchedule& schedule) {
    require(k >= 0 && k <= schedule.steps(), ErrorKind::DepthOutOfRange, "k=" + std::to_string(k));
    State z(z_k.begin(), z_k.end());
    if (k == 0) return z;
    for (int t = k; t >= 1; --t) z = ddim_step(z, t, eps(z, t), schedule);
    for (auto& v : z) v = std::clamp(v, -1.0f, 1.0f);
    return z;
}

State ddim_sample(const NoiseFn& eps, std::span<const float> z_k, int k, const NoiseSchedule& schedule,
                  const ConditionVector& cond, const ConditionVector& null_cond, float guidance_scale) {
    return ddim_sample(guided(eps, cond, null_cond, guidance_scale), z_k, k, schedule);
}

int encode_ratio(int iteration, int total_steps, const EncodeRatioConfig& cfg) {
    require(iteration >= 1, ErrorKind::InvalidParameter, "iterations are numbered from 1");
    require(cfg.first > 0.0 && cfg.first <= 1.0, ErrorKind::InvalidParameter, "first ratio must be in (0, 1]");
    const int offset = cfg.literal ? iteration : iteration - 1;
    const double ratio = std::max(cfg.floor, cfg.first - offset * cfg.step);
    return std::clamp(static_cast<int>(std::lround(total_steps * ratio)), 1, total_steps);
}

void dump_trajectory(const std::filesystem::path& dir, const LatentTrajectory& traj, int image_size) {
    std::filesystem::create_directories(dir);
    for (std::size_t i = 0; i < traj.states.size(); ++i) {
        char name[32];
        std::snprintf(name, sizeof name, "state_%03zu.png", i);
        save_png(dir / name, state_to_image(traj.states[i], image_size, image_size));
    }
}

} // namespace dreamedit
