// Copyright (C) 2026 The DreamEdit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <unistd.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <string>

#include "dreamedit/denoiser.hpp"
#include "dreamedit/image.hpp"
#include "dreamedit/masking.hpp"
#include "dreamedit/rng.hpp"
#include "dreamedit/vocab.hpp"

namespace dreamedit::testing {

inline Image random_image(int w, int h, std::uint64_t seed) {
    Rng rng(seed);
    Image img(w, h);
    for (auto& v : img.pixels) v = static_cast<float>(rng.uniform());
    return img;
}

inline Mask random_mask(int w, int h, double density, std::uint64_t seed) {
    Rng rng(seed);
    Mask m(w, h);
    for (auto& b : m.bits) b = rng.bernoulli(density) ? 1 : 0;
    return m;
}

inline std::vector<float> random_vector(std::size_t n, std::uint64_t seed, double scale = 1.0) {
    Rng rng(seed);
    std::vector<float> v(n);
    for (auto& x : v) x = static_cast<float>(scale * rng.normal());
    return v;
}

/// Untrained weights marked as carrying both special tokens, for exercising
/// control flow without a training run.
inline DenoiserParams untrained_bound_model(int size = 64, int timesteps = 100, std::uint64_t seed = 1) {
    DenoiserParams p = init_params(default_model_config(size, timesteps), seed);
    p.bound_tokens = {Vocabulary::instance().subject_token(), Vocabulary::instance().background_token()};
    std::sort(p.bound_tokens.begin(), p.bound_tokens.end());
    return p;
}

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        path_ = std::filesystem::temp_directory_path() /
                ("dreamedit_test_" + tag + "_" + std::to_string(fnv1a(tag) ^ static_cast<std::uint64_t>(::getpid())));
        std::filesystem::remove_all(path_);
        std::filesystem::create_directories(path_);
    }
    ~TempDir() { std::filesystem::remove_all(path_); }
    const std::filesystem::path& path() const { return path_; }

private:
    std::filesystem::path path_;
};

} // namespace dreamedit::testing
