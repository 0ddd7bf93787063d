// Copyright (C) 2026 The DreamEdit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace dreamedit {

enum class ScheduleFamily { LinearBeta, Cosine };

std::string to_string(ScheduleFamily family);
ScheduleFamily schedule_family_from_string(const std::string& name);

struct ScheduleParams {
    ScheduleFamily family = ScheduleFamily::LinearBeta;
    int steps = 100;
    // Linear-beta endpoints. When unset (<= 0) they default to the DDPM range
    // [1e-4, 0.02] rescaled by min(1000 / steps, 25) so that short chains still reach
    // near-pure noise.
    double beta_start = -1.0;
    double beta_end = -1.0;
    // Cosine offset s.
    double cosine_offset = 0.008;
    // Explicit betas override the family formula when non-empty.
    std::vector<double> betas;
};

/// Cumulative signal-variance table, indexed 0..T with t = 0 meaning clean data.
class NoiseSchedule {
public:
    NoiseSchedule() = default;

    int steps() const { return static_cast<int>(alpha_bar_.size()) - 1; }
    double alpha_bar(int t) const { return alpha_bar_.at(t); }
    std::span<const double> alpha_bars() const { return alpha_bar_; }

    /// alpha_t = sqrt(alpha_bar[t]).
    double signal_coeff(int t) const;
    /// sigma_t = sqrt(1 - alpha_bar[t]).
    double noise_coeff(int t) const;

    const ScheduleParams& params() const { return params_; }

    friend NoiseSchedule build_schedule(const ScheduleParams& params);

private:
    ScheduleParams params_;
    std::vector<double> alpha_bar_;
};

NoiseSchedule build_schedule(const ScheduleParams& params);

inline NoiseSchedule build_schedule(ScheduleFamily family, int steps) {
    ScheduleParams p;
    p.family = family;
    p.steps = steps;
    return build_schedule(p);
}

/// z_t = sqrt(abar_t) x + sqrt(1 - abar_t) eps, elementwise.
std::vector<float> add_noise(std::span<const float> x, int t, std::span<const float> eps, const NoiseSchedule& schedule);

nlohmann::json to_json(const NoiseSchedule& schedule);
NoiseSchedule schedule_from_json(const nlohmann::json& j);

} // namespace dreamedit
