// Copyright (C) 2026 The DreamEdit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "dreamedit/bench.hpp"
#include "dreamedit/editor.hpp"
#include "dreamedit/evaluation.hpp"

namespace dreamedit {

inline constexpr int kReportSchemaVersion = 1;

enum class Method { DreamEdit, CopyPaste, DreamBooth };
std::string_view to_string(Method m);
Method method_from_string(std::string_view name);

struct ExperimentConfig {
    Method method = Method::DreamEdit;
    /// Iteration count, kernel, ratios and guidance. The initialization is
    /// chosen per task kind unless `fixed_init` is set.
    EditConfig edit;
    bool fixed_init = false;
    InitStrategy replace_init = InitStrategy::None;
    InitStrategy add_init = InitStrategy::ExemplarInfill;
    /// Restricts the run to one task kind.
    std::optional<TaskKind> only_kind;
    std::uint64_t seed = 0;
    /// Background-token fine-tuning per task for the DreamBooth baseline.
    int background_bind_steps = 60;
    int background_bind_batch = 4;
    /// Persist per-iteration PNGs under runs/<task-id>/.
    bool save_images = true;
};

nlohmann::json to_json(const ExperimentConfig& cfg);
ExperimentConfig experiment_config_from_json(const nlohmann::json& j, ExperimentConfig defaults = {});

/// Per-class weights with the subject token bound.
using ModelSet = std::map<int, DenoiserParams>;

struct TaskResult {
    std::string id;
    TaskKind kind = TaskKind::Replace;
    int class_id = 0;
    Difficulty difficulty = Difficulty::Easy;
    /// Metrics of every produced image (one per iteration; one for single-shot methods).
    std::vector<AutoMetrics> iterations;
    int best = 0;
    std::optional<std::string> failure;

    /// Zero metrics for failed tasks.
    AutoMetrics best_metrics() const;
    AutoMetrics final_metrics() const;
    AutoMetrics first_metrics() const;
};

struct ExperimentResult {
    Method method = Method::DreamEdit;
    std::vector<TaskResult> tasks;
    nlohmann::json report;
};

/// Scores one output: the subject mask comes from the colour segmenter, with
/// the task's reference region as the fallback when nothing is found.
AutoMetrics score_output(const Image& output, const BenchTask& task, const BenchSubject& subject,
                         const Segmenter& segmenter, const EmbedderPair& embedders);

/// Receives every DreamEdit run as it completes.
using RunObserver = std::function<void(const BenchTask&, const EditRun&)>;

/// Runs the method on every selected task; failures are recorded per task.
/// With a non-empty `out`, writes runs/<task-id>/, report.json and report.txt.
ExperimentResult run_experiment(const Bench& bench, const ModelSet& models, const ExperimentConfig& cfg,
                                const std::filesystem::path& out = {}, const RunObserver& observe = {});

/// Consolidated report: overall (final, best, first iteration), per-iteration
/// table, easy/hard splits, per-task rows and the failure list.
nlohmann::json build_report(const Bench& bench, const ModelSet& models, const ExperimentConfig& cfg,
                            const std::vector<TaskResult>& tasks);
std::string format_report(const nlohmann::json& report);

/// Writes an EditRun to `dir`: manifest.json plus input/mask/dilated/output PNGs.
void save_run(const std::filesystem::path& dir, const EditRun& run, const nlohmann::json& extra = {});

} // namespace dreamedit
