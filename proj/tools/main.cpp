// Copyright (C) 2026 The DreamEdit Authors
// SPDX-License-Identifier: Apache-2.0

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "dreamedit/bench.hpp"
#include "dreamedit/error.hpp"
#include "dreamedit/experiment.hpp"
#include "dreamedit/rng.hpp"
#include "dreamedit/sampler.hpp"

namespace fs = std::filesystem;
using namespace dreamedit;

namespace {

constexpr int kExitTaskFailures = 1;
constexpr int kExitUsage = 2;

struct Globals {
    std::optional<std::uint64_t> seed;
    std::string config_path;
    std::string out;
    nlohmann::json config = nlohmann::json::object();

    nlohmann::json section(const char* name) const {
        return config.contains(name) ? config.at(name) : nlohmann::json::object();
    }
    std::uint64_t seed_for(std::string_view component, std::uint64_t fallback) const {
        return seed ? derive_seed(*seed, component) : fallback;
    }
    fs::path out_or(const char* fallback) const { return out.empty() ? fs::path(fallback) : fs::path(out); }
};

nlohmann::json read_json(const fs::path& path) {
    std::ifstream in(path);
    require(in.good(), ErrorKind::Io, "cannot read " + path.string());
    try {
        return nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorKind::Format, path.string() + ": " + e.what());
    }
}

void write_json(const fs::path& path, const nlohmann::json& j) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path);
    require(out.good(), ErrorKind::Io, "cannot write " + path.string());
    out << j.dump(2) << '\n';
}

TrainConfig train_config_from_json(const nlohmann::json& j, TrainConfig c) {
    c.steps = j.value("steps", c.steps);
    c.batch = j.value("batch", c.batch);
    c.learning_rate = j.value("learning_rate", c.learning_rate);
    c.beta1 = j.value("beta1", c.beta1);
    c.beta2 = j.value("beta2", c.beta2);
    c.grad_clip = j.value("grad_clip", c.grad_clip);
    c.cond_dropout = j.value("cond_dropout", c.cond_dropout);
    c.freeze_embeddings = j.value("freeze_embeddings", c.freeze_embeddings);
    c.seed = j.value("seed", c.seed);
    return c;
}

void progress(int step, double loss) {
    std::fprintf(stderr, "  step %5d  loss %.5f\n", step, loss);
}

ModelSet load_models(const fs::path& dir, const Bench& bench) {
    ModelSet models;
    for (const auto& s : bench.subjects) {
        const fs::path file = dir / (std::string(classes()[s.identity.class_id].name) + ".bin");
        if (fs::exists(file)) models.emplace(s.identity.class_id, load_params(file));
    }
    return models;
}

int count_failures(const ExperimentResult& r) {
    int n = 0;
    for (const auto& t : r.tasks) n += t.failure.has_value();
    return n;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Subject replacement and addition by iterative masked DDIM editing"};
    app.require_subcommand(1);
    Globals g;
    std::uint64_t seed_value = 0;
    auto* seed_opt = app.add_option("--seed", seed_value, "Global seed; component seeds are derived from it");
    app.add_option("--config", g.config_path, "JSON file with bench/train/bind/experiment sections");
    app.add_option("--out", g.out, "Output directory (or file for train-base)");

    // gen-bench
    auto* gen = app.add_subcommand("gen-bench", "Generate the procedural benchmark");
    std::string bench_name;
    std::optional<int> classes_n, tasks_n, exemplars_n, size_n;
    gen->add_option("--name", bench_name, "Benchmark name (directory under --out)");
    gen->add_option("--classes", classes_n);
    gen->add_option("--tasks-per-class", tasks_n);
    gen->add_option("--exemplars", exemplars_n);
    gen->add_option("--size", size_n, "Image side in pixels");

    // train-base
    auto* train = app.add_subcommand("train-base", "Train the base conditional denoiser");
    std::optional<int> train_steps, scenes_n;
    train->add_option("--steps", train_steps);
    train->add_option("--scenes", scenes_n, "Number of captioned training scenes");

    // bind-subject
    auto* bind = app.add_subcommand("bind-subject", "Fine-tune the subject token on a class's exemplars");
    std::string bench_dir, base_path, class_name;
    std::optional<int> bind_steps;
    bind->add_option("--bench", bench_dir)->required();
    bind->add_option("--base", base_path)->required();
    bind->add_option("--class", class_name, "Class to bind; all classes when omitted");
    bind->add_option("--steps", bind_steps);

    // edit
    auto* edit = app.add_subcommand("edit", "Run one task");
    std::string models_dir, task_id, method_name = "dreamedit";
    std::optional<int> iters;
    std::optional<float> guidance;
    bool dump = false;
    edit->add_option("--bench", bench_dir)->required();
    edit->add_option("--models", models_dir)->required();
    edit->add_option("--task", task_id)->required();
    edit->add_option("--method", method_name)->check(CLI::IsMember({"dreamedit", "copypaste", "dreambooth"}));
    edit->add_option("--iters", iters);
    edit->add_option("--guidance", guidance);
    edit->add_flag("--dump-trajectory", dump, "Write the first encoding trajectory as PNG frames");

    // run-experiment
    auto* run = app.add_subcommand("run-experiment", "Run a method over the benchmark and write report.json");
    std::string kind_name;
    bool no_images = false;
    run->add_option("--bench", bench_dir)->required();
    run->add_option("--models", models_dir)->required();
    run->add_option("--method", method_name)->check(CLI::IsMember({"dreamedit", "copypaste", "dreambooth"}));
    run->add_option("--kind", kind_name)->check(CLI::IsMember({"replace", "add"}));
    run->add_option("--iters", iters);
    run->add_option("--guidance", guidance);
    run->add_flag("--no-images", no_images);

    // evaluate
    auto* eval = app.add_subcommand("evaluate", "Re-score persisted run outputs");
    std::string runs_dir;
    eval->add_option("--bench", bench_dir)->required();
    eval->add_option("--runs", runs_dir)->required();

    // report
    auto* rep = app.add_subcommand("report", "Print a report.json as a table");
    std::string report_path;
    bool split_only = false;
    rep->add_option("--report", report_path)->required();
    rep->add_flag("--split", split_only, "Only the easy/hard table");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return e.get_exit_code() == 0 ? code : kExitUsage;
    }

    try {
        if (*seed_opt) g.seed = seed_value;
        if (!g.config_path.empty()) g.config = read_json(g.config_path);

        if (*gen) {
            BenchConfig cfg = bench_config_from_json(g.section("bench"));
            if (!bench_name.empty()) cfg.name = bench_name;
            if (classes_n) cfg.classes = *classes_n;
            if (tasks_n) cfg.tasks_per_class = *tasks_n;
            if (exemplars_n) cfg.exemplars = *exemplars_n;
            if (size_n) cfg.image_size = *size_n;
            if (g.seed) cfg.seed = *g.seed;
            const fs::path dir = g.out_or("bench") / cfg.name;
            write_bench(generate_bench(cfg), dir);
            std::printf("wrote %s\n", dir.string().c_str());
            return 0;
        }

        if (*train) {
            const nlohmann::json sec = g.section("train");
            TrainConfig cfg = train_config_from_json(sec, TrainConfig{});
            if (train_steps) cfg.steps = *train_steps;
            cfg.seed = g.seed_for("train", cfg.seed);
            cfg.on_progress = progress;
            const int size = sec.value("image_size", 64);
            const int scenes = scenes_n.value_or(sec.value("scenes", 256));
            const auto data = base_training_set(scenes, size, g.seed_for("scenes", sec.value("scene_seed", 7)));
            const NoiseSchedule schedule = build_schedule(ScheduleFamily::LinearBeta, sec.value("timesteps", 100));
            const TrainResult r = train_base(data, schedule, default_model_config(size, schedule.steps()), cfg);
            const fs::path path = g.out.empty() ? fs::path("models") / "base.bin" : fs::path(g.out);
            if (path.has_parent_path()) fs::create_directories(path.parent_path());
            save_params(path, r.params);
            std::printf("wrote %s (%zu parameters)\n", path.string().c_str(), r.params.parameter_count());
            return 0;
        }

        if (*bind) {
            const Bench bench = load_bench(bench_dir);
            const DenoiserParams base = load_params(base_path);
            TrainConfig cfg = train_config_from_json(g.section("bind"), default_bind_config());
            if (bind_steps) cfg.steps = *bind_steps;
            cfg.on_progress = progress;
            const fs::path dir = g.out_or("models");
            fs::create_directories(dir);
            for (const auto& s : bench.subjects) {
                const std::string name(classes()[s.identity.class_id].name);
                if (!class_name.empty() && class_name != name) continue;
                TrainConfig c = cfg;
                c.seed = g.seed_for("bind/" + name, cfg.seed);
                std::fprintf(stderr, "binding %s\n", name.c_str());
                save_params(dir / (name + ".bin"), bind_subject(base, s.set, base.schedule, c).params);
            }
            if (!class_name.empty()) class_id(class_name);
            std::printf("wrote bound models to %s\n", dir.string().c_str());
            return 0;
        }

        if (*edit || *run) {
            Bench bench = load_bench(bench_dir);
            const ModelSet models = load_models(models_dir, bench);
            ExperimentConfig cfg = experiment_config_from_json(g.section("experiment"));
            cfg.method = method_from_string(method_name);
            if (iters) cfg.edit.iterations = *iters;
            if (guidance) cfg.edit.guidance_scale = *guidance;
            if (g.seed) cfg.seed = *g.seed;
            if (!kind_name.empty()) cfg.only_kind = task_kind_from_string(kind_name);
            cfg.save_images = !no_images;
            if (*edit) {
                const BenchTask task = bench.task(task_id);
                bench.tasks = {task};
            }
            const fs::path out = g.out_or(*edit ? "." : "experiment");
            const ExperimentResult r = run_experiment(bench, models, cfg, out);
            if (*edit && dump && cfg.method == Method::DreamEdit && models.contains(bench.tasks[0].task.class_id)) {
                const DenoiserParams& p = models.at(bench.tasks[0].task.class_id);
                const int k = encode_ratio(1, p.schedule.steps(), cfg.edit.ratio);
                const LatentTrajectory traj = ddim_encode(network_noise(p), image_to_state(load_png(out / "runs" / task_id / "iter_1_input.png")),
                                                          k, p.schedule, encode_prompt(p, PromptTokens::null()));
                dump_trajectory(out / "runs" / task_id / "trajectory", traj, p.config.image_size);
            }
            std::fputs(format_report(r.report).c_str(), stdout);
            const int failed = count_failures(r);
            if (failed > 0) {
                std::fprintf(stderr, "%d of %zu tasks failed\n", failed, r.tasks.size());
                return kExitTaskFailures;
            }
            return 0;
        }

        if (*eval) {
            const Bench bench = load_bench(bench_dir);
            const ColorSegmenter segmenter;
            nlohmann::json rows = nlohmann::json::array();
            std::vector<AutoMetrics> finals;
            for (const auto& t : bench.tasks) {
                const fs::path dir = fs::path(runs_dir) / "runs" / t.task.id;
                if (!fs::exists(dir)) continue;
                std::vector<fs::path> outputs;
                for (int i = 1; fs::exists(dir / ("iter_" + std::to_string(i) + "_output.png")); ++i)
                    outputs.push_back(dir / ("iter_" + std::to_string(i) + "_output.png"));
                if (outputs.empty() && fs::exists(dir / "output.png")) outputs.push_back(dir / "output.png");
                if (outputs.empty()) continue;
                nlohmann::json iters = nlohmann::json::array();
                AutoMetrics last;
                for (const auto& p : outputs) {
                    last = score_output(load_png(p), t, bench.subject_for(t.task.class_id), segmenter, default_embedders());
                    iters.push_back(to_json(last));
                }
                finals.push_back(last);
                rows.push_back({{"id", t.task.id}, {"difficulty", to_string(t.difficulty)}, {"iterations", iters}});
            }
            require(!finals.empty(), ErrorKind::EmptyList, "no run outputs under " + runs_dir);
            nlohmann::json j = {{"tasks", rows}, {"final", to_json(AutoMetrics{})}};
            AutoMetrics mean;
            for (const auto& m : finals) {
                mean.dino_sub += m.dino_sub / finals.size();
                mean.dino_back += m.dino_back / finals.size();
                mean.clipi_sub += m.clipi_sub / finals.size();
                mean.clipi_back += m.clipi_back / finals.size();
            }
            j["final"] = to_json(mean);
            j["final"]["overall"] = overall_auto(finals);
            const fs::path path = g.out_or(runs_dir.c_str()) / "metrics.json";
            write_json(path, j);
            std::printf("%s\n", j["final"].dump(2).c_str());
            return 0;
        }

        if (*rep) {
            const nlohmann::json report = read_json(report_path);
            if (!split_only) {
                std::fputs(format_report(report).c_str(), stdout);
                return 0;
            }
            SplitReport split;
            const auto& j = report.at("splits").at("best");
            for (const char* name : {"easy", "hard"}) {
                if (j.at(name).is_null()) continue;
                SplitStats s{j.at(name).at("count").get<int>(), j.at(name).at("overall").get<double>(),
                             auto_metrics_from_json(j.at(name))};
                (std::string(name) == "easy" ? split.easy : split.hard) = s;
            }
            if (!j.at("gap").is_null()) split.gap = j.at("gap").get<double>();
            std::fputs(format_split_table(split).c_str(), stdout);
            return 0;
        }
    } catch (const Error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return e.kind() == ErrorKind::InvalidParameter || e.kind() == ErrorKind::InvalidStrategy ? kExitUsage : 1;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
