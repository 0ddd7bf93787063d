// Copyright (C) 2026 The DreamEdit Authors
// SPDX-License-Identifier: Apache-2.0

#include "dreamedit/experiment.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "dreamedit/error.hpp"
#include "dreamedit/rng.hpp"

namespace dreamedit {

namespace {

std::string hex(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    require(out.good(), ErrorKind::Io, "cannot write " + path.string());
    out << text;
    require(out.good(), ErrorKind::Io, "failed writing " + path.string());
}

std::string iter_name(int i, const char* what) {
    char buf[48];
    std::snprintf(buf, sizeof buf, "iter_%d_%s.png", i, what);
    return buf;
}

AutoMetrics mean_of(const std::vector<AutoMetrics>& ms) {
    AutoMetrics m;
    if (ms.empty()) return m;
    for (const auto& x : ms) {
        m.dino_sub += x.dino_sub;
        m.dino_back += x.dino_back;
        m.clipi_sub += x.clipi_sub;
        m.clipi_back += x.clipi_back;
    }
    const double n = static_cast<double>(ms.size());
    m.dino_sub /= n, m.dino_back /= n, m.clipi_sub /= n, m.clipi_back /= n;
    return m;
}

nlohmann::json aggregate(const std::vector<AutoMetrics>& ms) {
    nlohmann::json j = to_json(mean_of(ms));
    j["overall"] = ms.empty() ? nlohmann::json() : nlohmann::json(overall_auto(ms));
    j["count"] = ms.size();
    return j;
}

} // namespace

std::string_view to_string(Method m) {
    switch (m) {
    case Method::DreamEdit: return "dreamedit";
    case Method::CopyPaste: return "copypaste";
    case Method::DreamBooth: return "dreambooth";
    }
    return "dreamedit";
}

Method method_from_string(std::string_view name) {
    for (Method m : {Method::DreamEdit, Method::CopyPaste, Method::DreamBooth})
        if (to_string(m) == name) return m;
    fail(ErrorKind::InvalidParameter, "unknown method '" + std::string(name) + "'");
}

nlohmann::json to_json(const ExperimentConfig& c) {
    return {{"method", to_string(c.method)},
            {"edit", to_json(c.edit)},
            {"fixed_init", c.fixed_init},
            {"replace_init", to_string(c.replace_init)},
            {"add_init", to_string(c.add_init)},
            {"only_kind", c.only_kind ? nlohmann::json(to_string(*c.only_kind)) : nlohmann::json()},
            {"seed", c.seed},
            {"background_bind_steps", c.background_bind_steps},
            {"background_bind_batch", c.background_bind_batch}};
}

ExperimentConfig experiment_config_from_json(const nlohmann::json& j, ExperimentConfig c) {
    if (j.contains("method")) c.method = method_from_string(j.at("method").get<std::string>());
    if (j.contains("edit")) c.edit = edit_config_from_json(j.at("edit"), c.edit);
    c.fixed_init = j.value("fixed_init", c.fixed_init);
    if (j.contains("replace_init")) c.replace_init = init_strategy_from_string(j.at("replace_init").get<std::string>());
    if (j.contains("add_init")) c.add_init = init_strategy_from_string(j.at("add_init").get<std::string>());
    if (j.contains("only_kind") && !j.at("only_kind").is_null())
        c.only_kind = task_kind_from_string(j.at("only_kind").get<std::string>());
    c.seed = j.value("seed", c.seed);
    c.background_bind_steps = j.value("background_bind_steps", c.background_bind_steps);
    c.background_bind_batch = j.value("background_bind_batch", c.background_bind_batch);
    return c;
}

AutoMetrics TaskResult::best_metrics() const {
    return failure || iterations.empty() ? AutoMetrics{} : iterations.at(best);
}

AutoMetrics TaskResult::final_metrics() const {
    return failure || iterations.empty() ? AutoMetrics{} : iterations.back();
}

AutoMetrics TaskResult::first_metrics() const {
    return failure || iterations.empty() ? AutoMetrics{} : iterations.front();
}

AutoMetrics score_output(const Image& output, const BenchTask& task, const BenchSubject& subject,
                         const Segmenter& segmenter, const EmbedderPair& embedders) {
    Mask gen_mask;
    try {
        gen_mask = segment_subject(output, task.task.class_id, segmenter);
    } catch (const Error& e) {
        if (e.kind() != ErrorKind::SubjectNotFound && e.kind() != ErrorKind::EmptyMask) throw;
        gen_mask = task.reference_mask;
    }
    return score_example(output, subject.set, task.task.source, gen_mask, task.reference_mask, embedders);
}

void save_run(const std::filesystem::path& dir, const EditRun& run, const nlohmann::json& extra) {
    std::filesystem::create_directories(dir);
    nlohmann::json iters = nlohmann::json::array();
    if (run.initial.width > 0) save_png(dir / "initial.png", run.initial);
    for (const auto& it : run.iterations) {
        save_png(dir / iter_name(it.index, "input"), it.input);
        save_mask(dir / iter_name(it.index, "mask"), it.mask);
        save_mask(dir / iter_name(it.index, "dilated"), it.dilated);
        save_png(dir / iter_name(it.index, "output"), it.output);
        iters.push_back({{"index", it.index},
                         {"depth", it.depth},
                         {"mask_area", it.mask.area()},
                         {"dilated_area", it.dilated.area()},
                         {"mask_reused", it.mask_reused},
                         {"mask_provenance", to_string(it.mask.provenance)}});
    }
    nlohmann::json manifest = {{"task", run.task_id},
                               {"kind", to_string(run.kind)},
                               {"config", to_json(run.config)},
                               {"provenance", run.provenance},
                               {"failure", run.failure ? nlohmann::json(*run.failure) : nlohmann::json()},
                               {"iterations", iters}};
    for (const auto& [k, v] : extra.items()) manifest[k] = v;
    write_text(dir / "manifest.json", manifest.dump(2) + "\n");
}

ExperimentResult run_experiment(const Bench& bench, const ModelSet& models, const ExperimentConfig& cfg,
                                const std::filesystem::path& out, const RunObserver& observe) {
    const ColorSegmenter segmenter;
    const EmbedderPair embedders = default_embedders();
    const auto& vocab = Vocabulary::instance();
    ExperimentResult result;
    result.method = cfg.method;
    const bool persist = !out.empty();

    for (const BenchTask& bt : bench.tasks) {
        if (cfg.only_kind && bt.task.kind != *cfg.only_kind) continue;
        TaskResult r;
        r.id = bt.task.id;
        r.kind = bt.task.kind;
        r.class_id = bt.task.class_id;
        r.difficulty = bt.difficulty;
        const std::filesystem::path run_dir = persist ? out / "runs" / bt.task.id : std::filesystem::path();
        nlohmann::json record = {{"method", to_string(cfg.method)}};
        try {
            const BenchSubject& subject = bench.subject_for(bt.task.class_id);
            // CopyPaste runs without a model.
            const auto bound_model = [&]() -> const DenoiserParams& {
                const auto model = models.find(bt.task.class_id);
                require(model != models.end(), ErrorKind::UnboundToken,
                        "no bound model for class " + std::string(classes()[bt.task.class_id].name));
                return model->second;
            };
            const std::uint64_t task_seed = derive_seed(cfg.seed, bt.task.id);
            std::vector<Image> outputs;

            if (cfg.method == Method::DreamEdit) {
                EditConfig ec = cfg.edit;
                if (!cfg.fixed_init) ec.init = bt.task.kind == TaskKind::Replace ? cfg.replace_init : cfg.add_init;
                ec.seed = task_seed;
                const DenoiserParams& params = bound_model();
                const EditContext ctx{&params, &params.schedule, &segmenter};
                const EditRun run = dream_edit(bt.task, subject.set, ec, ctx);
                for (const auto& it : run.iterations) outputs.push_back(it.output);
                if (run.failure) r.failure = *run.failure;
                if (observe) observe(bt, run);
                if (persist) save_run(run_dir, run, record);
            } else if (cfg.method == Method::CopyPaste) {
                outputs.push_back(baseline_copypaste(bt.task, subject.set, segmenter, cfg.edit.copy_exemplar));
            } else {
                TrainConfig bind = default_bind_config();
                bind.steps = cfg.background_bind_steps;
                bind.batch = cfg.background_bind_batch;
                bind.seed = derive_seed(task_seed, "background");
                const DenoiserParams& params = bound_model();
                const TrainingPair scene{bt.task.source, PromptTokens::parse("a <y> background")};
                const DenoiserParams both =
                    bind_subject(params, subject.set, params.schedule, bind, std::span(&scene, 1)).params;
                const PromptTokens prompt = PromptTokens::parse(
                    "a <v> " + std::string(classes()[bt.task.class_id].name) + " in <y> background");
                require(both.is_bound(vocab.background_token()), ErrorKind::UnboundToken, "background token not bound");
                outputs.push_back(baseline_dreambooth(both, both.schedule, prompt, task_seed, cfg.edit.guidance_scale));
            }
            for (const Image& img : outputs) r.iterations.push_back(score_output(img, bt, subject, segmenter, embedders));
            if (persist && cfg.method != Method::DreamEdit) {
                std::filesystem::create_directories(run_dir);
                save_png(run_dir / "output.png", outputs.front());
                record["task"] = bt.task.id;
                write_text(run_dir / "manifest.json", record.dump(2) + "\n");
            }
        } catch (const Error& e) {
            r.failure = e.what();
        }
        if (!r.iterations.empty()) {
            std::vector<double> scores;
            for (const auto& m : r.iterations) scores.push_back(m.geomean());
            r.best = select_best(scores);
        }
        if (persist) {
            std::filesystem::create_directories(run_dir);
            nlohmann::json metrics = {{"task", r.id}, {"best_iteration", r.best + 1}, {"iterations", nlohmann::json::array()}};
            for (const auto& m : r.iterations) metrics["iterations"].push_back(to_json(m));
            metrics["failure"] = r.failure ? nlohmann::json(*r.failure) : nlohmann::json();
            write_text(run_dir / "metrics.json", metrics.dump(2) + "\n");
        }
        result.tasks.push_back(std::move(r));
    }
    result.report = build_report(bench, models, cfg, result.tasks);
    if (persist) {
        std::filesystem::create_directories(out);
        write_text(out / "report.json", result.report.dump(2) + "\n");
        write_text(out / "report.txt", format_report(result.report));
    }
    return result;
}

nlohmann::json build_report(const Bench& bench, const ModelSet& models, const ExperimentConfig& cfg,
                            const std::vector<TaskResult>& tasks) {
    nlohmann::json model_hashes = nlohmann::json::object();
    for (const auto& [cls, params] : models) model_hashes[std::string(classes()[cls].name)] = hex(params.weights_hash());

    std::vector<AutoMetrics> finals, bests, firsts;
    std::vector<LabeledResult> final_labeled, best_labeled;
    nlohmann::json rows = nlohmann::json::array(), failures = nlohmann::json::array();
    std::size_t depth = 0;
    for (const auto& t : tasks) depth = std::max(depth, t.iterations.size());
    std::vector<std::vector<AutoMetrics>> per_iter(depth);
    for (const auto& t : tasks) {
        finals.push_back(t.final_metrics());
        bests.push_back(t.best_metrics());
        firsts.push_back(t.first_metrics());
        final_labeled.push_back({t.id, t.difficulty, t.final_metrics()});
        best_labeled.push_back({t.id, t.difficulty, t.best_metrics()});
        for (std::size_t i = 0; i < depth; ++i)
            per_iter[i].push_back(t.failure || i >= t.iterations.size() ? AutoMetrics{} : t.iterations[i]);
        nlohmann::json iters = nlohmann::json::array();
        for (const auto& m : t.iterations) iters.push_back(to_json(m));
        rows.push_back({{"id", t.id},
                        {"kind", to_string(t.kind)},
                        {"class", classes()[t.class_id].name},
                        {"difficulty", to_string(t.difficulty)},
                        {"best_iteration", t.best + 1},
                        {"iterations", iters},
                        {"failure", t.failure ? nlohmann::json(*t.failure) : nlohmann::json()}});
        if (t.failure) failures.push_back({{"id", t.id}, {"error", *t.failure}});
    }
    nlohmann::json per_iteration = nlohmann::json::array();
    for (std::size_t i = 0; i < depth; ++i) {
        nlohmann::json row = aggregate(per_iter[i]);
        row["iteration"] = i + 1;
        per_iteration.push_back(row);
    }
    return {{"schema_version", kReportSchemaVersion},
            {"method", to_string(cfg.method)},
            {"bench", {{"name", bench.config.name}, {"seed", bench.config.seed}, {"tasks", bench.tasks.size()}}},
            {"config", to_json(cfg)},
            {"models", model_hashes},
            {"overall",
             {{"final", aggregate(finals)}, {"best", aggregate(bests)}, {"first_iteration", aggregate(firsts)}}},
            {"per_iteration", per_iteration},
            {"splits",
             {{"final", to_json(split_report(final_labeled))}, {"best", to_json(split_report(best_labeled))}}},
            {"tasks", rows},
            {"failures", failures}};
}

std::string format_report(const nlohmann::json& report) {
    std::ostringstream s;
    char line[200];
    s << "method " << report.at("method").get<std::string>() << ", bench " << report.at("bench").at("name").get<std::string>()
      << ", " << report.at("tasks").size() << " tasks, " << report.at("failures").size() << " failed\n\n";
    std::snprintf(line, sizeof line, "%-10s %9s %10s %10s %11s %8s\n", "row", "dino-sub", "dino-back", "clipi-sub",
                  "clipi-back", "overall");
    s << line;
    const auto print_row = [&](const std::string& name, const nlohmann::json& j) {
        const double overall = j.at("overall").is_null() ? 0.0 : j.at("overall").get<double>();
        std::snprintf(line, sizeof line, "%-10s %9.3f %10.3f %10.3f %11.3f %8.3f\n", name.c_str(),
                      j.at("dino_sub").get<double>(), j.at("dino_back").get<double>(), j.at("clipi_sub").get<double>(),
                      j.at("clipi_back").get<double>(), overall);
        s << line;
    };
    for (const auto& row : report.at("per_iteration")) print_row("iter " + std::to_string(row.at("iteration").get<int>()), row);
    print_row("final", report.at("overall").at("final"));
    print_row("best", report.at("overall").at("best"));
    s << "\nbest iteration by split\n";
    std::snprintf(line, sizeof line, "%-10s %6s %8s\n", "split", "count", "overall");
    s << line;
    const auto& splits = report.at("splits").at("best");
    for (const char* name : {"easy", "hard"}) {
        if (splits.at(name).is_null()) {
            std::snprintf(line, sizeof line, "%-10s %6s\n", name, "absent");
        } else {
            std::snprintf(line, sizeof line, "%-10s %6d %8.3f\n", name, splits.at(name).at("count").get<int>(),
                          splits.at(name).at("overall").get<double>());
        }
        s << line;
    }
    if (!splits.at("gap").is_null()) {
        std::snprintf(line, sizeof line, "gap (easy - hard) %+.3f\n", splits.at("gap").get<double>());
        s << line;
    }
    for (const auto& f : report.at("failures"))
        s << "failed " << f.at("id").get<std::string>() << ": " << f.at("error").get<std::string>() << '\n';
    return s.str();
}

} // namespace dreamedit
