// Copyright (C) 2026 The DreamEdit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "dreamedit/denoiser.hpp"
#include "dreamedit/editor.hpp"
#include "dreamedit/evaluation.hpp"
#include "dreamedit/scene.hpp"

namespace dreamedit {

inline constexpr int kBenchSchemaVersion = 1;

struct BenchConfig {
    std::string name = "default";
    int classes = kClassCount;
    int tasks_per_class = 10;
    int image_size = 64;
    int exemplars = 5;
    std::uint64_t seed = 2026;
    /// Replacement tasks whose source hue is within 60 degrees of the target.
    double near_hue_fraction = 0.65;
    double shape_change_fraction = 0.12;
    double contact_fraction = 0.3;
    double unusual_view_fraction = 0.1;
    double hue_threshold = 60.0;

    void validate() const;
};

nlohmann::json to_json(const BenchConfig& cfg);
BenchConfig bench_config_from_json(const nlohmann::json& j, BenchConfig defaults = {});

/// One customized subject: its fixed appearance and the exemplar set.
struct BenchSubject {
    SubjectSpec identity;
    std::vector<SceneSpec> scenes;
    SubjectSet set;
};

struct BenchTask {
    EditTask task;
    SceneSpec scene;
    Difficulty difficulty = Difficulty::Easy;
    /// Add tasks: the bbox sits on the bottom edge of the image.
    bool contact = false;
    /// Add tasks: the bbox is flattened to half height.
    bool unusual_view = false;
    /// Source subject mask (Replace) or bbox mask (Add).
    Mask reference_mask;
};

struct Bench {
    BenchConfig config;
    std::vector<BenchSubject> subjects;  // indexed by class id
    std::vector<BenchTask> tasks;

    const BenchSubject& subject_for(int class_id) const;
    const BenchTask& task(const std::string& id) const;
};

/// Deterministic in the config; images are quantized to 8 bits so that a
/// written and re-read bench is identical to the generated one.
Bench generate_bench(const BenchConfig& cfg);

/// Writes manifest.json, subjects/<class>/*.png and tasks/<id>/*.
void write_bench(const Bench& bench, const std::filesystem::path& dir);
Bench load_bench(const std::filesystem::path& dir);

/// Replace: hard iff the hue distance exceeds the threshold or the shapes
/// differ. Add: hard iff the bbox carries a contact or viewpoint constraint.
/// Throws ClassMismatch.
Difficulty assign_difficulty(const BenchTask& task, const BenchSubject& subject, double hue_threshold = 60.0);

/// Captioned scenes for training the base model, independent of the tasks.
std::vector<TrainingPair> base_training_set(int count, int image_size, std::uint64_t seed);

} // namespace dreamedit
