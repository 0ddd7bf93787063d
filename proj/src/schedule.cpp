// Copyright (C) 2026 The DreamEdit Authors
// SPDX-License-Identifier: Apache-2.0

#include "dreamedit/schedule.hpp"

#include <algorithm>
#include <cmath>

#include "dreamedit/error.hpp"

namespace dreamedit {

std::string to_string(ScheduleFamily family) {
    return family == ScheduleFamily::Cosine ? "cosine" : "linear-beta";
}

ScheduleFamily schedule_family_from_string(const std::string& name) {
    if (name == "linear-beta" || name == "linear") return ScheduleFamily::LinearBeta;
    if (name == "cosine") return ScheduleFamily::Cosine;
    fail(ErrorKind::InvalidParameter, "unknown schedule family '" + name + "'");
}

namespace {

std::vector<double> linear_betas(const ScheduleParams& p) {
    // Capped so that chains shorter than 40 steps keep beta_end <= 0.5.
    const double scale = std::min(1000.0 / p.steps, 25.0);
    const double start = p.beta_start > 0 ? p.beta_start : 1e-4 * scale;
    const double end = p.beta_end > 0 ? p.beta_end : 0.02 * scale;
    require(0.0 < start && start < end && end < 1.0, ErrorKind::InvalidParameter,
            "linear-beta requires 0 < beta_start < beta_end < 1");
    std::vector<double> betas(p.steps);
    for (int i = 0; i < p.steps; ++i)
        betas[i] = p.steps == 1 ? start : start + (end - start) * i / static_cast<double>(p.steps - 1);
    return betas;
}

std::vector<double> cosine_alpha_bar(const ScheduleParams& p) {
    require(p.cosine_offset > 0.0, ErrorKind::InvalidParameter, "cosine offset must be positive");
    const auto f = [&](int t) {
        const double c = std::cos((t / static_cast<double>(p.steps) + p.cosine_offset) / (1.0 + p.cosine_offset) * M_PI / 2);
        return c * c;
    };
    const double f0 = f(0);
    std::vector<double> abar(p.steps + 1);
    abar[0] = 1.0;
    for (int t = 1; t <= p.steps; ++t) {
        // Per-step beta clipped at 0.999 keeps abar[T] strictly positive.
        const double beta = std::min(1.0 - (f(t) / f0) / (f(t - 1) / f0), 0.999);
        abar[t] = abar[t - 1] * (1.0 - beta);
    }
    return abar;
}

} // namespace

NoiseSchedule build_schedule(const ScheduleParams& params) {
    require(params.steps >= 1, ErrorKind::InvalidParameter, "schedule needs T >= 1");
    NoiseSchedule s;
    s.params_ = params;
    if (!params.betas.empty() || params.family == ScheduleFamily::LinearBeta) {
        std::vector<double> betas = params.betas.empty() ? linear_betas(params) : params.betas;
        require(static_cast<int>(betas.size()) == params.steps, ErrorKind::InvalidParameter, "need exactly T betas");
        s.alpha_bar_.assign(params.steps + 1, 1.0);
        for (int t = 1; t <= params.steps; ++t) {
            require(betas[t - 1] > 0.0 && betas[t - 1] < 1.0, ErrorKind::InvalidParameter, "beta outside (0, 1)");
            s.alpha_bar_[t] = s.alpha_bar_[t - 1] * (1.0 - betas[t - 1]);
        }
    } else {
        s.alpha_bar_ = cosine_alpha_bar(params);
    }
    for (int t = 1; t <= params.steps; ++t)
        require(s.alpha_bar_[t] < s.alpha_bar_[t - 1] && s.alpha_bar_[t] > 0.0, ErrorKind::InvalidParameter,
                "alpha_bar must be strictly decreasing and positive");
    return s;
}

double NoiseSchedule::signal_coeff(int t) const { return std::sqrt(alpha_bar(t)); }
double NoiseSchedule::noise_coeff(int t) const { return std::sqrt(1.0 - alpha_bar(t)); }

std::vector<float> add_noise(std::span<const float> x, int t, std::span<const float> eps, const NoiseSchedule& schedule) {
    require(x.size() == eps.size(), ErrorKind::ShapeMismatch, "x and eps differ in size");
    require(t >= 0 && t <= schedule.steps(), ErrorKind::TimestepOutOfRange, "t=" + std::to_string(t));
    const auto a = static_cast<float>(schedule.signal_coeff(t));
    const auto s = static_cast<float>(schedule.noise_coeff(t));
    std::vector<float> z(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) z[i] = a * x[i] + s * eps[i];
    return z;
}

nlohmann::json to_json(const NoiseSchedule& schedule) {
    const auto& p = schedule.params();
    nlohmann::json params = {{"cosine_offset", p.cosine_offset}};
    if (p.family == ScheduleFamily::LinearBeta) {
        // Capped so that chains shorter than 40 steps keep beta_end <= 0.5.
    const double scale = std::min(1000.0 / p.steps, 25.0);
        params["beta_start"] = p.beta_start > 0 ? p.beta_start : 1e-4 * scale;
        params["beta_end"] = p.beta_end > 0 ? p.beta_end : 0.02 * scale;
    }
    if (!p.betas.empty()) params["betas"] = p.betas;
    return {{"family", to_string(p.family)}, {"T", p.steps}, {"params", params}};
}

NoiseSchedule schedule_from_json(const nlohmann::json& j) {
    ScheduleParams p;
    p.family = schedule_family_from_string(j.at("family").get<std::string>());
    p.steps = j.at("T").get<int>();
    const auto& params = j.value("params", nlohmann::json::object());
    p.beta_start = params.value("beta_start", -1.0);
    p.beta_end = params.value("beta_end", -1.0);
    p.cosine_offset = params.value("cosine_offset", 0.008);
    if (params.contains("betas")) p.betas = params["betas"].get<std::vector<double>>();
    return build_schedule(p);
}

} // namespace dreamedit
