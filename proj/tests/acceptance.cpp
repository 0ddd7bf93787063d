// Copyright (C) 2026 The DreamEdit Authors
// SPDX-License-Identifier: Apache-2.0

// Acceptance run: trains the toy models, runs every method on the default
// bench and prints one PASS/FAIL line per criterion. Exits 1 if any fails.

#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "dreamedit/bench.hpp"
#include "dreamedit/error.hpp"
#include "dreamedit/experiment.hpp"
#include "dreamedit/rng.hpp"

namespace fs = std::filesystem;
using namespace dreamedit;

namespace {

// Tolerances.
constexpr double kHumanOverallTol = 0.002;
constexpr float kBackgroundTol = 1e-5f;
constexpr float kZeroRoundTripTol = 1e-5f;
constexpr double kRoundTripMae = 0.05;
constexpr double kTrendFraction = 0.70;
constexpr int kMinEasyReplace = 20;
constexpr double kRuntimeBudgetSeconds = 30 * 60;

// Human-evaluation table: (subject, background, realistic, printed overall).
// Replacement rows first, then addition rows, in table order.
struct HumanRow {
    const char* method;
    double subject, background, realistic, overall;
};
constexpr HumanRow kHumanRows[] = {
    {"replace/DreamBooth", 0.543, 0.0, 0.707, 0.072},
    {"replace/Customized-DiffEdit", 0.21, 0.828, 0.668, 0.488},
    {"replace/CopyPaste", 1.0, 0.148, 0.123, 0.263},
    {"replace/PhotoSwap", 0.15, 0.773, 0.663, 0.425},
    {"replace/CopyHarmonize", 1.0, 0.552, 0.147, 0.433},
    {"replace/DreamEditor(1) COPY", 0.778, 0.407, 0.52, 0.548},
    {"replace/DreamEditor(5) COPY", 0.817, 0.505, 0.54, 0.606},
    {"replace/DreamEditor(1)", 0.532, 0.760, 0.557, 0.608},
    {"replace/DreamEditor(5)", 0.630, 0.800, 0.582, 0.664},
    {"add/DreamBooth", 0.477, 0.0, 0.635, 0.067},
    {"add/Customized-DiffEdit", 0.288, 0.302, 0.252, 0.280},
    {"add/CopyPaste", 0.983, 1.0, 0.033, 0.319},
    {"add/PhotoSwap", 0.21, 0.562, 0.305, 0.33},
    {"add/CopyHarmonize", 0.983, 1.0, 0.295, 0.662},
    {"add/DreamEditor(1) COPY", 0.635, 0.978, 0.265, 0.548},
    {"add/DreamEditor(5) COPY", 0.633, 0.973, 0.393, 0.623},
    {"add/DreamEditor(1) infill", 0.287, 0.99, 0.427, 0.495},
    {"add/DreamEditor(5) infill", 0.478, 0.972, 0.528, 0.626},
};

int failures = 0;

void report(int id, const char* name, bool pass, const std::string& detail) {
    if (!pass) ++failures;
    std::printf("[%s] C%-2d %-34s %s\n", pass ? "PASS" : "FAIL", id, name, detail.c_str());
    std::fflush(stdout);
}

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

class Clock {
public:
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    }

private:
    std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

void log(const std::string& msg) {
    std::fprintf(stderr, "%s\n", msg.c_str());
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), {}};
}

Mask brute_dilate(const Mask& m, int k) {
    const int r = k / 2;
    Mask out(m.width, m.height);
    for (int y = 0; y < m.height; ++y)
        for (int x = 0; x < m.width; ++x)
            for (int dy = -r; dy <= r; ++dy)
                for (int dx = -r; dx <= r; ++dx) {
                    const int sx = x + dx, sy = y + dy;
                    if (sx >= 0 && sy >= 0 && sx < m.width && sy < m.height && m.at(sx, sy)) out.set(x, y);
                }
    return out;
}

float max_diff_outside(const Image& a, const Image& b, const Mask& m) {
    float worst = 0.0f;
    for (int y = 0; y < a.height; ++y)
        for (int x = 0; x < a.width; ++x)
            if (!m.at(x, y))
                for (int c = 0; c < 3; ++c) worst = std::max(worst, std::abs(a.at(x, y, c) - b.at(x, y, c)));
    return worst;
}

double mean_of(const std::vector<TaskResult>& tasks, auto metric) {
    double acc = 0.0;
    for (const auto& t : tasks) acc += metric(t);
    return tasks.empty() ? 0.0 : acc / static_cast<double>(tasks.size());
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Acceptance run"};
    std::string work = "acceptance_work";
    bool reuse = false;
    app.add_option("--work", work, "Scratch directory for bench, models and runs");
    app.add_flag("--reuse-models", reuse, "Load models from <work>/models when present instead of training");
    CLI11_PARSE(app, argc, argv);
    const fs::path dir(work);
    fs::create_directories(dir);

    // C1: human-overall arithmetic on every printed row.
    {
        int ok = 0;
        double worst = 0.0;
        for (const auto& r : kHumanRows) {
            const double err = std::abs(overall_human(r.subject, r.background, r.realistic) - r.overall);
            worst = std::max(worst, err);
            if (err <= kHumanOverallTol) ++ok;
            else log(fmt("  C1 row %s off by %.4f", r.method, err));
        }
        constexpr int n = static_cast<int>(std::size(kHumanRows));
        report(1, "human-overall reproduction", ok == n,
               fmt("%d/%d rows within %.3f (max err %.5f)", ok, n, kHumanOverallTol, worst));
    }

    // C2: dilation against the brute-force max filter.
    {
        Rng rng(2026);
        int ok = 0, total = 0;
        for (int i = 0; i < 100; ++i) {
            const double density = std::array{0.002, 0.01, 0.05, 0.3}[i % 4];
            Mask m(64, 64);
            for (auto& b : m.bits) b = rng.bernoulli(density) ? 1 : 0;
            for (const int k : {1, 3, 5, 21}) {
                ++total;
                if (dilate(m, k).same_bits(brute_dilate(m, k))) ++ok;
            }
        }
        report(2, "morphology oracle", ok == total, fmt("%d/%d (mask, m) pairs exact", ok, total));
    }

    // C9: overall_auto against per-example geomean then mean.
    {
        Rng rng(9);
        int ok = 0;
        for (int table = 0; table < 50; ++table) {
            std::vector<AutoMetrics> rows(1 + table % 12);
            for (auto& m : rows) {
                m = {rng.uniform(), rng.uniform(), rng.uniform(), rng.uniform()};
                if (rng.bernoulli(0.1)) m.clipi_back = 0.0;
            }
            double acc = 0.0;
            for (const auto& m : rows) acc += std::pow(m.dino_sub * m.dino_back * m.clipi_sub * m.clipi_back, 0.25);
            if (overall_auto(rows) == acc / static_cast<double>(rows.size())) ++ok;
        }
        report(9, "overall_auto oracle", ok == 50, fmt("%d/50 tables bit-equal", ok));
    }

    Clock budget;
    // Bench on disk, then loaded back, exactly as the CLI would consume it.
    const BenchConfig bench_cfg;
    write_bench(generate_bench(bench_cfg), dir / "bench_a" / bench_cfg.name);
    const Bench bench = load_bench(dir / "bench_a" / bench_cfg.name);

    // Models: base 2000 steps, then 500 binding steps per class.
    const NoiseSchedule schedule = build_schedule(ScheduleFamily::LinearBeta, 100);
    DenoiserParams base;
    ModelSet models;
    const fs::path model_dir = dir / "models";
    fs::create_directories(model_dir);
    {
        Clock c;
        if (reuse && fs::exists(model_dir / "base.bin")) {
            base = load_params(model_dir / "base.bin");
        } else {
            TrainConfig tc;
            tc.on_progress = [](int step, double loss) {
                if (step % 500 == 0) log(fmt("  base step %d loss %.4f", step, loss));
            };
            base = train_base(base_training_set(256, bench_cfg.image_size, 7), schedule,
                              default_model_config(bench_cfg.image_size, schedule.steps()), tc)
                       .params;
            save_params(model_dir / "base.bin", base);
        }
        for (const auto& s : bench.subjects) {
            const fs::path file = model_dir / (std::string(classes()[s.identity.class_id].name) + ".bin");
            if (reuse && fs::exists(file)) {
                models.emplace(s.identity.class_id, load_params(file));
                continue;
            }
            DenoiserParams bound = bind_subject(base, s.set, schedule, default_bind_config()).params;
            save_params(file, bound);
            models.emplace(s.identity.class_id, std::move(bound));
        }
        log(fmt("models ready in %.0f s", c.seconds()));
    }

    // C4: closed-form round trip with a zero predictor and the trained round trip.
    {
        const NoiseFn zero = [](std::span<const float> z, int, const ConditionVector&) { return State(z.size(), 0.0f); };
        float zero_err = 0.0f;
        for (int i = 0; i < 20; ++i) {
            const State x = image_to_state(bench.tasks[i].task.source);
            const LatentTrajectory traj = ddim_encode(zero, x, 80, schedule, {0.0f});
            const State back = ddim_sample(zero, traj.states[80], 80, schedule, {0.0f}, {0.0f}, 1.0f);
            for (std::size_t j = 0; j < x.size(); ++j) zero_err = std::max(zero_err, std::abs(back[j] - x[j]));
        }
        const int k = encode_ratio(1, schedule.steps());
        const ConditionVector null = encode_prompt(base, PromptTokens::null());
        double mae = 0.0, worst = 0.0;
        for (int i = 0; i < 20; ++i) {
            const Image& img = bench.tasks[i].task.source;
            const LatentTrajectory traj = ddim_encode(network_noise(base), image_to_state(img), k, schedule, null);
            const Image back = state_to_image(ddim_sample(network_noise(base), traj.states[k], k, schedule, null, null, 1.0f),
                                              img.width, img.height);
            const double e = mean_abs_diff(back, img);
            mae += e / 20.0;
            worst = std::max(worst, e);
        }
        report(4, "DDIM closed forms and round trip", zero_err <= kZeroRoundTripTol && mae <= kRoundTripMae,
               fmt("zero-predictor max err %.2g (<= %.0e); trained k=%d MAE %.4f (worst %.4f, <= %.2f) on 20 images",
                   zero_err, kZeroRoundTripTol, k, mae, worst, kRoundTripMae));
    }

    // DreamEdit runs. The observer checks per-iteration invariants (C3, C5).
    int observed = 0, bg_ok = 0, never_ok = 0, depth_ok = 0;
    float bg_worst = 0.0f, never_worst = 0.0f;
    const std::vector<int> expected_depths{80, 70, 60, 50, 40};
    const RunObserver observe = [&](const BenchTask& bt, const EditRun& run) {
        ++observed;
        if (!run.complete()) return;
        bool ok = true;
        Mask ever(run.initial.width, run.initial.height);
        std::vector<int> depths;
        for (const auto& it : run.iterations) {
            const float d = max_diff_outside(it.output, it.input, it.dilated);
            bg_worst = std::max(bg_worst, d);
            ok = ok && d <= kBackgroundTol;
            for (std::size_t i = 0; i < ever.bits.size(); ++i) ever.bits[i] |= it.dilated.bits[i];
            depths.push_back(it.depth);
        }
        bg_ok += ok;
        // The addition initialization writes inside the placement box only.
        if (bt.task.bbox) {
            const Mask box = mask_from_bbox(ever.width, ever.height, *bt.task.bbox);
            for (std::size_t i = 0; i < ever.bits.size(); ++i) ever.bits[i] |= box.bits[i];
        }
        const float n = max_diff_outside(run.iterations.back().output, bt.task.source, ever);
        never_worst = std::max(never_worst, n);
        never_ok += n <= kBackgroundTol;
        depth_ok += depths == expected_depths;
    };

    ExperimentConfig de_cfg;
    de_cfg.only_kind = TaskKind::Replace;
    Clock edit_clock;
    const ExperimentResult de_rep = run_experiment(bench, models, de_cfg, dir / "dreamedit_replace", observe);
    log(fmt("dreamedit replace: %.0f s", edit_clock.seconds()));
    de_cfg.only_kind = TaskKind::Add;
    const ExperimentResult de_add = run_experiment(bench, models, de_cfg, dir / "dreamedit_add", observe);
    log(fmt("dreamedit add: %.0f s", edit_clock.seconds()));
    const double pipeline_seconds = budget.seconds();

    std::vector<TaskResult> de_all = de_rep.tasks;
    de_all.insert(de_all.end(), de_add.tasks.begin(), de_add.tasks.end());
    int de_failed = 0;
    for (const auto& t : de_all) de_failed += t.failure.has_value();
    if (de_failed > 0) log(fmt("  %d dreamedit tasks failed", de_failed));

    report(3, "exact background preservation", observed >= 20 && bg_ok == observed && never_ok == observed,
           fmt("%d runs: per-iteration %d ok (max %.2g), never-masked %d ok (max %.2g), tol %.0e", observed, bg_ok,
               bg_worst, never_ok, never_worst, kBackgroundTol));
    report(5, "encode-ratio schedule", observed > 0 && depth_ok == observed,
           fmt("%d/%d runs recorded k = [80, 70, 60, 50, 40]", depth_ok, observed));

    // C6: iteration trend on the easy replacement split.
    {
        int easy = 0, improved = 0;
        double best_overall = 0.0, first_overall = 0.0;
        for (const auto& t : de_rep.tasks) {
            if (t.difficulty != Difficulty::Easy) continue;
            ++easy;
            if (t.failure) continue;
            improved += t.best_metrics().subject() >= t.first_metrics().subject();
            best_overall += t.best_metrics().geomean();
            first_overall += t.first_metrics().geomean();
        }
        const double frac = easy > 0 ? static_cast<double>(improved) / easy : 0.0;
        best_overall /= std::max(easy, 1);
        first_overall /= std::max(easy, 1);
        report(6, "iteration trend (easy replace)",
               easy >= kMinEasyReplace && frac >= kTrendFraction && best_overall >= first_overall &&
                   pipeline_seconds <= kRuntimeBudgetSeconds,
               fmt("%d tasks; subject(best) >= subject(iter 1) in %.1f%% (>= %.0f%%); overall best %.4f vs iter 1 "
                   "%.4f; %.0f s incl. training (<= %.0f s)",
                   easy, 100.0 * frac, 100.0 * kTrendFraction, best_overall, first_overall, pipeline_seconds,
                   kRuntimeBudgetSeconds));
    }

    // C7: easy/hard gap of the selected outputs over both task kinds.
    {
        std::vector<LabeledResult> labeled;
        for (const auto& t : de_all) labeled.push_back({t.id, t.difficulty, t.best_metrics()});
        const SplitReport split = split_report(labeled);
        const bool pass = split.easy && split.hard && split.easy->overall > split.hard->overall;
        report(7, "easy/hard gap", pass,
               fmt("easy %.4f (%d) vs hard %.4f (%d), gap %+.4f", split.easy ? split.easy->overall : 0.0,
                   split.easy ? split.easy->count : 0, split.hard ? split.hard->overall : 0.0,
                   split.hard ? split.hard->count : 0, split.gap.value_or(0.0)));
    }

    // C8: baseline ordering over the whole suite.
    {
        ExperimentConfig cp_cfg;
        cp_cfg.method = Method::CopyPaste;
        const ExperimentResult cp = run_experiment(bench, models, cp_cfg, dir / "copypaste");
        ExperimentConfig db_cfg;
        db_cfg.method = Method::DreamBooth;
        Clock c;
        const ExperimentResult db = run_experiment(bench, models, db_cfg, dir / "dreambooth");
        log(fmt("dreambooth: %.0f s", c.seconds()));

        const auto sub = [](const TaskResult& t) { return t.best_metrics().subject(); };
        const auto back = [](const TaskResult& t) { return t.best_metrics().background(); };
        const double de_s = mean_of(de_all, sub), cp_s = mean_of(cp.tasks, sub), db_s = mean_of(db.tasks, sub);
        const double de_b = mean_of(de_all, back), cp_b = mean_of(cp.tasks, back), db_b = mean_of(db.tasks, back);
        const bool pass = cp_s > de_s && cp_s > db_s && db_b < de_b && db_b < cp_b;
        report(8, "baseline ordering", pass,
               fmt("subject: copypaste %.4f, dreamedit %.4f, dreambooth %.4f; background: dreambooth %.4f, "
                   "dreamedit %.4f, copypaste %.4f",
                   cp_s, de_s, db_s, db_b, de_b, cp_b));
    }

    // C10: regenerate the bench elsewhere and repeat the replacement run.
    {
        write_bench(generate_bench(bench_cfg), dir / "bench_b" / bench_cfg.name);
        const bool same_manifest = slurp(dir / "bench_a" / bench_cfg.name / "manifest.json") ==
                                   slurp(dir / "bench_b" / bench_cfg.name / "manifest.json");
        const Bench again = load_bench(dir / "bench_b" / bench_cfg.name);
        ExperimentConfig cfg;
        cfg.only_kind = TaskKind::Replace;
        run_experiment(again, models, cfg, dir / "dreamedit_replace_b");
        const std::string a = slurp(dir / "dreamedit_replace" / "report.json");
        const std::string b = slurp(dir / "dreamedit_replace_b" / "report.json");
        report(10, "determinism", same_manifest && !a.empty() && a == b,
               fmt("manifest %s; report.json %zu bytes, %s", same_manifest ? "identical" : "DIFFERS", a.size(),
                   a == b ? "byte-identical" : "DIFFERS"));
    }

    std::printf("%d criteria failed; total %.0f s\n", failures, budget.seconds());
    return failures == 0 ? 0 : 1;
}
