// Copyright (C) 2026 The DreamEdit Authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <fstream>

#include "dreamedit/experiment.hpp"
#include "helpers.hpp"

using namespace dreamedit;
using namespace dreamedit::testing;

namespace {

Bench tiny_bench() {
    BenchConfig cfg;
    cfg.name = "tiny";
    cfg.classes = 1;
    cfg.tasks_per_class = 2;
    cfg.exemplars = 2;
    return generate_bench(cfg);
}

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p);
    return {std::istreambuf_iterator<char>(in), {}};
}

} // namespace

TEST_SUITE("experiment") {

TEST_CASE("copypaste keeps every pixel outside the paste region") {
    const Bench bench = tiny_bench();
    ExperimentConfig cfg;
    cfg.method = Method::CopyPaste;
    const ColorSegmenter seg;
    const ExperimentResult r = run_experiment(bench, {}, cfg);
    REQUIRE(r.tasks.size() == bench.tasks.size());
    for (std::size_t i = 0; i < r.tasks.size(); ++i) {
        CHECK_FALSE(r.tasks[i].failure.has_value());
        const BenchTask& t = bench.tasks[i];
        const Image out = baseline_copypaste(t.task, bench.subject_for(t.task.class_id).set, seg);
        const Bbox region = t.task.kind == TaskKind::Add ? *t.task.bbox : bbox_of(seg.segment(t.task.source, t.task.class_id));
        for (int y = 0; y < 64; ++y)
            for (int x = 0; x < 64; ++x) {
                const bool inside = x >= region.x && y >= region.y && x < region.x + region.w && y < region.y + region.h;
                if (!inside) CHECK(out.rgb(x, y) == t.task.source.rgb(x, y));
            }
    }
}

TEST_CASE("dreamedit prefix property, failures and report files") {
    const Bench bench = tiny_bench();
    ModelSet models;
    models.emplace(0, untrained_bound_model(64, 100, 3));
    ExperimentConfig cfg;
    cfg.only_kind = TaskKind::Replace;
    cfg.edit.iterations = 1;
    const ExperimentResult one = run_experiment(bench, models, cfg);
    cfg.edit.iterations = 2;
    TempDir dir("experiment");
    const ExperimentResult two = run_experiment(bench, models, cfg, dir.path());
    REQUIRE(one.tasks.size() == 2);
    REQUIRE(two.tasks.size() == 2);
    for (std::size_t i = 0; i < 2; ++i) {
        REQUIRE(two.tasks[i].iterations.size() == 2);
        CHECK(to_json(one.tasks[i].iterations[0]) == to_json(two.tasks[i].iterations[0]));
        CHECK(two.tasks[i].best == select_best(std::vector<double>{two.tasks[i].iterations[0].geomean(),
                                                                   two.tasks[i].iterations[1].geomean()}));
    }
    const auto& id = two.tasks[0].id;
    CHECK(std::filesystem::exists(dir.path() / "runs" / id / "manifest.json"));
    CHECK(std::filesystem::exists(dir.path() / "runs" / id / "iter_2_output.png"));
    const auto report = nlohmann::json::parse(slurp(dir.path() / "report.json"));
    CHECK(report["schema_version"] == kReportSchemaVersion);
    CHECK(report["per_iteration"].size() == 2);
    CHECK(report["failures"].empty());
    CHECK(report == two.report);

    // A class without a model fails per task without stopping the run.
    const ExperimentResult missing = run_experiment(bench, {}, cfg);
    for (const auto& t : missing.tasks) {
        CHECK(t.failure.has_value());
        CHECK(t.best_metrics().geomean() == 0.0);
    }
    CHECK(missing.report["failures"].size() == missing.tasks.size());
}

TEST_CASE("experiment config JSON round trip") {
    ExperimentConfig c;
    c.method = Method::DreamBooth;
    c.only_kind = TaskKind::Add;
    c.edit.guidance_scale = 3.0f;
    const ExperimentConfig r = experiment_config_from_json(to_json(c));
    CHECK(to_json(r) == to_json(c));
    CHECK(method_from_string("copypaste") == Method::CopyPaste);
}

}
