// Copyright (C) 2026 The DreamEdit Authors
// SPDX-License-Identifier: Apache-2.0

#include "dreamedit/bench.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "dreamedit/error.hpp"
#include "dreamedit/rng.hpp"

namespace dreamedit {

namespace {

constexpr int kMinImageSize = 32;
constexpr float kMinContrast = 0.3f;
constexpr int kMargin = 2;

int scaled(int px, int image_size) { return std::max(4, static_cast<int>(std::lround(px * image_size / 64.0))); }

void place(Rng& rng, SubjectSpec& s, int image_size) {
    const Bbox b = s.bbox();
    s.x = rng.uniform_int(kMargin, image_size - kMargin - b.w);
    s.y = rng.uniform_int(kMargin, image_size - kMargin - b.h);
}

/// Draws backgrounds until the fixed-colour subject stands out.
BackgroundSpec contrasting_background(Rng& rng, const SubjectSpec& s, int image_size, bool with_floor) {
    BackgroundSpec bg = random_background(rng, image_size, with_floor);
    for (int attempt = 0; attempt < 64 && subject_contrast(s, bg) < kMinContrast; ++attempt)
        bg = random_background(rng, image_size, with_floor);
    return bg;
}

Shape other_shape(Rng& rng, Shape avoid) {
    static constexpr Shape kShapes[] = {Shape::Circle, Shape::Square, Shape::Star, Shape::Triangle};
    Shape s = avoid;
    while (s == avoid) s = kShapes[rng.uniform_int(0, 3)];
    return s;
}

float wrap_hue(double h) {
    h = std::fmod(h, 360.0);
    return static_cast<float>(h < 0 ? h + 360.0 : h);
}

std::string pad2(int v) { return v < 10 ? "0" + std::to_string(v) : std::to_string(v); }

void write_json(const std::filesystem::path& path, const nlohmann::json& j) {
    std::ofstream out(path);
    require(out.good(), ErrorKind::Io, "cannot write " + path.string());
    out << j.dump(2) << '\n';
}

nlohmann::json read_json(const std::filesystem::path& path) {
    std::ifstream in(path);
    require(in.good(), ErrorKind::Io, "cannot read " + path.string());
    try {
        return nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorKind::Format, path.string() + ": " + e.what());
    }
}

} // namespace

void BenchConfig::validate() const {
    require(classes >= 1 && classes <= kClassCount, ErrorKind::InvalidParameter, "class count out of range");
    require(tasks_per_class >= 1, ErrorKind::InvalidParameter, "tasks per class must be >= 1");
    require(exemplars >= 1, ErrorKind::InvalidParameter, "exemplar count must be >= 1");
    require(image_size >= kMinImageSize, ErrorKind::SizeTooSmall,
            "image size " + std::to_string(image_size) + " cannot hold a subject");
    for (double f : {near_hue_fraction, shape_change_fraction, contact_fraction, unusual_view_fraction})
        require(f >= 0.0 && f <= 1.0, ErrorKind::InvalidParameter, "fractions must lie in [0, 1]");
}

nlohmann::json to_json(const BenchConfig& c) {
    return {{"name", c.name},
            {"classes", c.classes},
            {"tasks_per_class", c.tasks_per_class},
            {"image_size", c.image_size},
            {"exemplars", c.exemplars},
            {"seed", c.seed},
            {"near_hue_fraction", c.near_hue_fraction},
            {"shape_change_fraction", c.shape_change_fraction},
            {"contact_fraction", c.contact_fraction},
            {"unusual_view_fraction", c.unusual_view_fraction},
            {"hue_threshold", c.hue_threshold}};
}

BenchConfig bench_config_from_json(const nlohmann::json& j, BenchConfig c) {
    c.name = j.value("name", c.name);
    c.classes = j.value("classes", c.classes);
    c.tasks_per_class = j.value("tasks_per_class", c.tasks_per_class);
    c.image_size = j.value("image_size", c.image_size);
    c.exemplars = j.value("exemplars", c.exemplars);
    c.seed = j.value("seed", c.seed);
    c.near_hue_fraction = j.value("near_hue_fraction", c.near_hue_fraction);
    c.shape_change_fraction = j.value("shape_change_fraction", c.shape_change_fraction);
    c.contact_fraction = j.value("contact_fraction", c.contact_fraction);
    c.unusual_view_fraction = j.value("unusual_view_fraction", c.unusual_view_fraction);
    c.hue_threshold = j.value("hue_threshold", c.hue_threshold);
    return c;
}

const BenchSubject& Bench::subject_for(int class_id) const {
    for (const auto& s : subjects)
        if (s.identity.class_id == class_id) return s;
    fail(ErrorKind::InvalidParameter, "bench has no subject of class " + std::to_string(class_id));
}

const BenchTask& Bench::task(const std::string& id) const {
    for (const auto& t : tasks)
        if (t.task.id == id) return t;
    fail(ErrorKind::InvalidParameter, "bench has no task '" + id + "'");
}

Difficulty assign_difficulty(const BenchTask& task, const BenchSubject& subject, double hue_threshold) {
    require(task.task.class_id == subject.identity.class_id, ErrorKind::ClassMismatch,
            "task and subject are of different classes");
    if (task.task.kind == TaskKind::Add) return task.contact || task.unusual_view ? Difficulty::Hard : Difficulty::Easy;
    require(task.scene.subject.has_value(), ErrorKind::InvalidParameter, "replace task without a source subject");
    const SubjectSpec& src = *task.scene.subject;
    const bool far = hue_distance(src.hue, subject.identity.hue) > hue_threshold;
    return far || src.shape != subject.identity.shape ? Difficulty::Hard : Difficulty::Easy;
}

Bench generate_bench(const BenchConfig& cfg) {
    cfg.validate();
    const int n = cfg.image_size;
    Bench bench;
    bench.config = cfg;
    for (int c = 0; c < cfg.classes; ++c) {
        const ClassInfo& info = classes()[c];
        Rng rng(derive_seed(cfg.seed, "subject/" + std::string(info.name)));
        BenchSubject subj;
        subj.identity.class_id = c;
        subj.identity.shape = info.shape;
        subj.identity.pattern = info.pattern;
        subj.identity.hue = static_cast<float>(rng.uniform(0.0, 360.0));
        subj.identity.saturation = static_cast<float>(rng.uniform(0.8, 1.0));
        subj.identity.value = static_cast<float>(rng.uniform(0.85, 1.0));
        subj.set.class_id = c;
        for (int k = 0; k < cfg.exemplars; ++k) {
            SubjectSpec s = subj.identity;
            s.size = rng.uniform_int(scaled(16, n), scaled(24, n));
            place(rng, s, n);
            SceneSpec scene{contrasting_background(rng, s, n, rng.bernoulli(0.5)), s};
            RenderedScene r = render_scene(scene, n);
            subj.scenes.push_back(scene);
            subj.set.images.push_back(quantize8(r.image));
            subj.set.masks.push_back(std::move(r.mask));
            subj.set.prompts.push_back(subject_prompt(c));
        }
        bench.subjects.push_back(std::move(subj));
    }

    for (int kind = 0; kind < 2; ++kind) {
        for (int c = 0; c < cfg.classes; ++c) {
            const BenchSubject& subj = bench.subjects[c];
            const std::string cname(classes()[c].name);
            for (int j = 0; j < cfg.tasks_per_class; ++j) {
                BenchTask t;
                t.task.kind = kind == 0 ? TaskKind::Replace : TaskKind::Add;
                t.task.id = (kind == 0 ? "rep_" : "add_") + cname + "_" + pad2(j);
                t.task.class_id = c;
                t.task.target_prompt = subject_prompt(c);
                Rng rng(derive_seed(cfg.seed, "task/" + t.task.id));
                if (t.task.kind == TaskKind::Replace) {
                    SubjectSpec s;
                    s.class_id = c;
                    s.pattern = subj.identity.pattern;
                    s.shape = rng.bernoulli(cfg.shape_change_fraction) ? other_shape(rng, subj.identity.shape)
                                                                       : subj.identity.shape;
                    const bool near = rng.bernoulli(cfg.near_hue_fraction);
                    const double offset = near ? rng.uniform(-45.0, 45.0)
                                               : (rng.bernoulli(0.5) ? 1.0 : -1.0) * rng.uniform(75.0, 180.0);
                    s.hue = wrap_hue(subj.identity.hue + offset);
                    s.size = rng.uniform_int(scaled(14, n), scaled(26, n));
                    place(rng, s, n);
                    BackgroundSpec bg = random_background(rng, n, rng.bernoulli(0.5));
                    pick_contrasting_color(rng, s, bg);
                    for (int attempt = 0; attempt < 64 && subject_contrast(s, bg) < kMinContrast; ++attempt) {
                        bg = random_background(rng, n, bg.floor_y >= 0);
                        pick_contrasting_color(rng, s, bg);
                    }
                    t.scene = SceneSpec{bg, s};
                    RenderedScene r = render_scene(t.scene, n);
                    t.task.source = quantize8(r.image);
                    t.reference_mask = std::move(r.mask);
                } else {
                    t.contact = rng.bernoulli(cfg.contact_fraction);
                    t.unusual_view = rng.bernoulli(cfg.unusual_view_fraction);
                    const bool floor = t.contact || rng.bernoulli(0.5);
                    t.scene = SceneSpec{random_background(rng, n, floor), std::nullopt};
                    Bbox box;
                    box.w = rng.uniform_int(scaled(16, n), scaled(24, n));
                    box.h = t.unusual_view ? std::max(1, box.w / 2) : box.w;
                    box.x = rng.uniform_int(kMargin, n - kMargin - box.w);
                    box.y = t.contact ? n - box.h : rng.uniform_int(kMargin, n - kMargin - box.h);
                    t.task.bbox = box;
                    t.task.source = quantize8(render_background(t.scene.background, n));
                    t.reference_mask = mask_from_bbox(n, n, box);
                }
                t.difficulty = assign_difficulty(t, subj, cfg.hue_threshold);
                bench.tasks.push_back(std::move(t));
            }
        }
    }
    return bench;
}

void write_bench(const Bench& bench, const std::filesystem::path& dir) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    nlohmann::json subjects = nlohmann::json::array();
    for (const auto& s : bench.subjects) {
        const std::string cname(classes()[s.identity.class_id].name);
        const fs::path sub = fs::path("subjects") / cname;
        fs::create_directories(dir / sub);
        nlohmann::json exemplars = nlohmann::json::array();
        for (std::size_t k = 0; k < s.set.images.size(); ++k) {
            const std::string stem = std::to_string(k);
            save_png(dir / sub / (stem + ".png"), s.set.images[k]);
            save_mask(dir / sub / (stem + "_mask.png"), s.set.masks[k]);
            exemplars.push_back({{"image", (sub / (stem + ".png")).generic_string()},
                                 {"mask", (sub / (stem + "_mask.png")).generic_string()},
                                 {"prompt", s.set.prompts[k].text()},
                                 {"background", to_json(s.scenes[k].background)},
                                 {"subject", to_json(*s.scenes[k].subject)}});
        }
        subjects.push_back({{"class", cname}, {"identity", to_json(s.identity)}, {"exemplars", exemplars}});
    }
    nlohmann::json tasks = nlohmann::json::array();
    int counts[2][2] = {{0, 0}, {0, 0}};
    for (const auto& t : bench.tasks) {
        const fs::path td = fs::path("tasks") / t.task.id;
        fs::create_directories(dir / td);
        save_png(dir / td / "source.png", t.task.source);
        save_mask(dir / td / "mask.png", t.reference_mask);
        const Bbox box = t.task.bbox ? *t.task.bbox : bbox_of(t.reference_mask);
        write_json(dir / td / "bbox.json", to_json(box));
        nlohmann::json j = {{"id", t.task.id},
                            {"kind", to_string(t.task.kind)},
                            {"class", classes()[t.task.class_id].name},
                            {"difficulty", to_string(t.difficulty)},
                            {"contact", t.contact},
                            {"unusual_view", t.unusual_view},
                            {"source", (td / "source.png").generic_string()},
                            {"mask", (td / "mask.png").generic_string()},
                            {"bbox", t.task.bbox ? to_json(*t.task.bbox) : nlohmann::json()},
                            {"target_prompt", t.task.target_prompt.text()},
                            {"background", to_json(t.scene.background)},
                            {"subject", t.scene.subject ? to_json(*t.scene.subject) : nlohmann::json()}};
        tasks.push_back(std::move(j));
        ++counts[t.task.kind == TaskKind::Add][t.difficulty == Difficulty::Hard];
    }
    const nlohmann::json manifest = {
        {"schema_version", kBenchSchemaVersion},
        {"config", to_json(bench.config)},
        {"counts",
         {{"replace", counts[0][0] + counts[0][1]},
          {"add", counts[1][0] + counts[1][1]},
          {"replace_easy", counts[0][0]},
          {"replace_hard", counts[0][1]},
          {"add_easy", counts[1][0]},
          {"add_hard", counts[1][1]}}},
        {"subjects", subjects},
        {"tasks", tasks}};
    write_json(dir / "manifest.json", manifest);
}

Bench load_bench(const std::filesystem::path& dir) {
    const nlohmann::json m = read_json(dir / "manifest.json");
    require(m.at("schema_version").get<int>() == kBenchSchemaVersion, ErrorKind::Format, "unsupported bench schema");
    Bench bench;
    bench.config = bench_config_from_json(m.at("config"));
    for (const auto& sj : m.at("subjects")) {
        BenchSubject s;
        s.identity = subject_from_json(sj.at("identity"));
        s.set.class_id = s.identity.class_id;
        for (const auto& ej : sj.at("exemplars")) {
            s.set.images.push_back(load_png(dir / ej.at("image").get<std::string>()));
            Mask mask = load_mask(dir / ej.at("mask").get<std::string>());
            mask.provenance = MaskProvenance::Oracle;
            s.set.masks.push_back(std::move(mask));
            s.set.prompts.push_back(PromptTokens::parse(ej.at("prompt").get<std::string>()));
            s.scenes.push_back(SceneSpec{background_from_json(ej.at("background")), subject_from_json(ej.at("subject"))});
        }
        bench.subjects.push_back(std::move(s));
    }
    for (const auto& tj : m.at("tasks")) {
        BenchTask t;
        t.task.id = tj.at("id").get<std::string>();
        t.task.kind = task_kind_from_string(tj.at("kind").get<std::string>());
        t.task.class_id = class_id(tj.at("class").get<std::string>());
        t.task.source = load_png(dir / tj.at("source").get<std::string>());
        if (!tj.at("bbox").is_null()) t.task.bbox = bbox_from_json(tj.at("bbox"));
        t.task.target_prompt = PromptTokens::parse(tj.at("target_prompt").get<std::string>());
        t.difficulty = difficulty_from_string(tj.at("difficulty").get<std::string>());
        t.contact = tj.at("contact").get<bool>();
        t.unusual_view = tj.at("unusual_view").get<bool>();
        t.reference_mask = load_mask(dir / tj.at("mask").get<std::string>());
        t.reference_mask.provenance = MaskProvenance::Oracle;
        t.scene.background = background_from_json(tj.at("background"));
        if (!tj.at("subject").is_null()) t.scene.subject = subject_from_json(tj.at("subject"));
        bench.tasks.push_back(std::move(t));
    }
    return bench;
}

std::vector<TrainingPair> base_training_set(int count, int image_size, std::uint64_t seed) {
    require(count >= 1, ErrorKind::EmptyDataset, "base training set needs at least one scene");
    require(image_size >= kMinImageSize, ErrorKind::SizeTooSmall, "image size too small");
    std::vector<TrainingPair> pairs;
    pairs.reserve(count);
    for (int i = 0; i < count; ++i) {
        Rng rng(derive_seed(seed, "base/" + std::to_string(i)));
        const int c = rng.uniform_int(0, kClassCount - 1);
        const ClassInfo& info = classes()[c];
        SubjectSpec s;
        s.class_id = c;
        s.pattern = info.pattern;
        s.shape = rng.bernoulli(0.75) ? info.shape : other_shape(rng, info.shape);
        s.hue = static_cast<float>(rng.uniform(0.0, 360.0));
        s.size = rng.uniform_int(scaled(12, image_size), scaled(28, image_size));
        if (rng.bernoulli(0.15)) s.aspect = 0.5f;
        place(rng, s, image_size);
        BackgroundSpec bg = random_background(rng, image_size, rng.bernoulli(0.5));
        pick_contrasting_color(rng, s, bg);
        const RenderedScene r = render_scene(SceneSpec{bg, s}, image_size);
        const std::string caption = "a " + std::string(color_word_for(s.hue)) + " " + std::string(to_string(s.shape)) +
                                    " " + std::string(info.name) + " in " + std::string(to_string(bg.texture)) +
                                    " background";
        pairs.push_back({quantize8(r.image), PromptTokens::parse(caption)});
    }
    return pairs;
}

} // namespace dreamedit
