// Copyright (C) 2026 The DreamEdit Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cmath>

#include "dreamedit/error.hpp"
#include "dreamedit/rng.hpp"
#include "dreamedit/schedule.hpp"

using namespace dreamedit;

TEST_SUITE("schedules") {

TEST_CASE("explicit betas give the cumulative product") {
    ScheduleParams p;
    p.steps = 2;
    p.betas = {0.1, 0.2};
    const NoiseSchedule s = build_schedule(p);
    REQUIRE(s.steps() == 2);
    CHECK(s.alpha_bar(0) == 1.0);
    CHECK(s.alpha_bar(1) == doctest::Approx(0.9).epsilon(1e-12));
    CHECK(s.alpha_bar(2) == doctest::Approx(0.72).epsilon(1e-12));
}

TEST_CASE("alpha_bar at t = 0 is one") {
    CHECK(build_schedule(ScheduleFamily::LinearBeta, 1000).alpha_bar(0) == 1.0);
    CHECK(build_schedule(ScheduleFamily::Cosine, 64).alpha_bar(0) == 1.0);
}

TEST_CASE("default linear range matches the 1000-step chain") {
    const NoiseSchedule s = build_schedule(ScheduleFamily::LinearBeta, 1000);
    CHECK(1.0 - s.alpha_bar(1) == doctest::Approx(1e-4).epsilon(1e-9));
    const NoiseSchedule s100 = build_schedule(ScheduleFamily::LinearBeta, 100);
    CHECK(1.0 - s100.alpha_bar(1) == doctest::Approx(1e-3).epsilon(1e-9));
    CHECK(s100.alpha_bar(100) < 1e-3);
}

TEST_CASE("cosine schedule decreases strictly") {
    const NoiseSchedule s = build_schedule(ScheduleFamily::Cosine, 64);
    for (int t = 0; t < 64; ++t) CHECK(s.alpha_bar(t + 1) < s.alpha_bar(t));
}

TEST_CASE("every family stays in (0, 1] and is non-increasing") {
    for (const auto family : {ScheduleFamily::LinearBeta, ScheduleFamily::Cosine}) {
        for (const int steps : {1, 10, 100, 1000}) {
            const NoiseSchedule s = build_schedule(family, steps);
            for (int t = 0; t <= steps; ++t) {
                CHECK(s.alpha_bar(t) > 0.0);
                CHECK(s.alpha_bar(t) <= 1.0);
                if (t > 0) CHECK(s.alpha_bar(t) <= s.alpha_bar(t - 1));
            }
        }
    }
}

TEST_CASE("invalid parameters are rejected") {
    ScheduleParams p;
    p.steps = 0;
    CHECK_THROWS_AS(build_schedule(p), Error);
    p.steps = 2;
    p.betas = {0.1, 1.0};
    CHECK_THROWS_AS(build_schedule(p), Error);
    p.betas = {0.1};
    CHECK_THROWS_AS(build_schedule(p), Error);
}

TEST_CASE("add_noise closed forms") {
    ScheduleParams p;
    p.steps = 1;
    p.betas = {0.36};
    const NoiseSchedule s = build_schedule(p);
    const std::vector<float> x{1.0f}, eps{0.5f};
    CHECK(add_noise(x, 1, eps, s)[0] == doctest::Approx(1.10).epsilon(1e-6));
    CHECK(add_noise(x, 0, eps, s)[0] == 1.0f);

    const NoiseSchedule lin = build_schedule(ScheduleFamily::LinearBeta, 100);
    const std::vector<float> xs{-1.0f, -0.25f, 0.0f, 0.7f}, zero(4, 0.0f);
    for (int t = 0; t <= 100; ++t) {
        const auto z = add_noise(xs, t, zero, lin);
        for (std::size_t i = 0; i < xs.size(); ++i)
            CHECK(z[i] == static_cast<float>(std::sqrt(lin.alpha_bar(t))) * xs[i]);
    }
    CHECK_THROWS_AS(add_noise(xs, 101, zero, lin), Error);
    CHECK_THROWS_AS(add_noise(xs, 3, std::vector<float>(3, 0.0f), lin), Error);
}

TEST_CASE("add_noise variance matches the marginal (Monte Carlo)") {
    const NoiseSchedule s = build_schedule(ScheduleFamily::LinearBeta, 100);
    constexpr int kDraws = 10000;
    Rng rng(11);
    std::vector<float> x(kDraws), eps(kDraws);
    // Uniform in [-1, 1]: variance 1/3.
    for (int i = 0; i < kDraws; ++i) x[i] = static_cast<float>(rng.uniform(-1.0, 1.0));
    for (int i = 0; i < kDraws; ++i) eps[i] = static_cast<float>(rng.normal());
    for (const int t : {0, 1, 10, 25, 50, 80, 100}) {
        const auto z = add_noise(x, t, eps, s);
        double mean = 0.0, sq = 0.0;
        for (const float v : z) mean += v;
        mean /= kDraws;
        for (const float v : z) sq += (v - mean) * (v - mean);
        const double var = sq / (kDraws - 1);
        const double expected = s.alpha_bar(t) / 3.0 + (1.0 - s.alpha_bar(t));
        // Standard error of a sample variance for near-normal data.
        const double se = expected * std::sqrt(2.0 / (kDraws - 1));
        CHECK(std::abs(var - expected) <= 3.0 * se + 1e-12);
    }
}

TEST_CASE("schedule JSON round trip") {
    const NoiseSchedule s = build_schedule(ScheduleFamily::Cosine, 50);
    const NoiseSchedule r = schedule_from_json(to_json(s));
    REQUIRE(r.steps() == 50);
    for (int t = 0; t <= 50; ++t) CHECK(r.alpha_bar(t) == s.alpha_bar(t));
    CHECK(schedule_family_from_string(to_string(ScheduleFamily::LinearBeta)) == ScheduleFamily::LinearBeta);
}

}
