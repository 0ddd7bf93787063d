// Copyright (C) 2026 The DreamEdit Authors
// SPDX-License-Identifier: Apache-2.0

#include "dreamedit/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <sstream>

#include "dreamedit/error.hpp"
#include "dreamedit/rng.hpp"

namespace dreamedit {

namespace {

constexpr int kCells = 4;
constexpr int kOrientationBins = 8;
constexpr float kGradientWeight = 1.5f;
constexpr float kBias = 0.05f;
constexpr int kHistLevels = 4;
constexpr int kHistBins = kHistLevels * kHistLevels * kHistLevels;
constexpr int kProjectedDims = 32;
constexpr std::uint64_t kProjectionSeed = 0x5eedc11bULL;

void normalize(std::vector<float>& v) {
    double n = 0.0;
    for (float x : v) n += static_cast<double>(x) * x;
    n = std::sqrt(n);
    require(n > 0.0, ErrorKind::ZeroVector, "embedding has zero norm");
    for (float& x : v) x = static_cast<float>(x / n);
}

std::pair<int, int> cell_range(int i, int extent) {
    int lo = i * extent / kCells;
    int hi = (i + 1) * extent / kCells;
    lo = std::min(lo, extent - 1);
    return {lo, std::max(hi, lo + 1)};
}

float luminance(const Image& img, int x, int y) {
    return 0.299f * img.at(x, y, 0) + 0.587f * img.at(x, y, 1) + 0.114f * img.at(x, y, 2);
}

} // namespace

std::vector<float> CellGradientEmbedder::embed(const Image& img) const {
    require(img.width > 0 && img.height > 0, ErrorKind::InvalidParameter, "empty image");
    std::vector<float> out;
    out.reserve(kCells * kCells * 3 + kOrientationBins + 1);
    for (int cy = 0; cy < kCells; ++cy) {
        const auto [y0, y1] = cell_range(cy, img.height);
        for (int cx = 0; cx < kCells; ++cx) {
            const auto [x0, x1] = cell_range(cx, img.width);
            for (int c = 0; c < 3; ++c) {
                double acc = 0.0;
                for (int y = y0; y < y1; ++y)
                    for (int x = x0; x < x1; ++x) acc += img.at(x, y, c);
                out.push_back(static_cast<float>(acc / ((y1 - y0) * (x1 - x0)) - 0.5));
            }
        }
    }
    std::vector<double> hist(kOrientationBins, 0.0);
    double total = 0.0;
    for (int y = 1; y + 1 < img.height; ++y) {
        for (int x = 1; x + 1 < img.width; ++x) {
            const double gx = luminance(img, x + 1, y) - luminance(img, x - 1, y);
            const double gy = luminance(img, x, y + 1) - luminance(img, x, y - 1);
            const double mag = std::hypot(gx, gy);
            if (mag == 0.0) continue;
            double theta = std::atan2(gy, gx);
            if (theta < 0) theta += std::numbers::pi;
            const int bin = std::min(kOrientationBins - 1, static_cast<int>(theta / std::numbers::pi * kOrientationBins));
            hist[bin] += mag;
            total += mag;
        }
    }
    for (double h : hist) out.push_back(total > 0.0 ? static_cast<float>(kGradientWeight * h / total) : 0.0f);
    out.push_back(kBias);
    normalize(out);
    return out;
}

ProjectedHistogramEmbedder::ProjectedHistogramEmbedder() : projection_(static_cast<std::size_t>(kProjectedDims) * kHistBins) {
    Rng rng(kProjectionSeed);
    const double scale = 1.0 / std::sqrt(static_cast<double>(kProjectedDims));
    for (float& w : projection_) w = static_cast<float>(rng.normal() * scale);
}

std::vector<float> ProjectedHistogramEmbedder::embed(const Image& img) const {
    require(img.width > 0 && img.height > 0, ErrorKind::InvalidParameter, "empty image");
    std::vector<double> hist(kHistBins, 0.0);
    const auto level = [](float v) { return std::clamp(static_cast<int>(v * kHistLevels), 0, kHistLevels - 1); };
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x)
            hist[(level(img.at(x, y, 0)) * kHistLevels + level(img.at(x, y, 1))) * kHistLevels + level(img.at(x, y, 2))] += 1.0;
    const double n = static_cast<double>(img.width) * img.height;
    std::vector<float> out(kProjectedDims);
    for (int o = 0; o < kProjectedDims; ++o) {
        double acc = 0.0;
        for (int b = 0; b < kHistBins; ++b) acc += projection_[o * kHistBins + b] * (hist[b] / n);
        out[o] = static_cast<float>(acc);
    }
    normalize(out);
    return out;
}

EmbedderPair default_embedders() {
    static const CellGradientEmbedder a;
    static const ProjectedHistogramEmbedder b;
    return {&a, &b};
}

double cosine_sim(std::span<const float> u, std::span<const float> v) {
    require(u.size() == v.size(), ErrorKind::ShapeMismatch, "vectors differ in length");
    double dot = 0.0, nu = 0.0, nv = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) {
        dot += static_cast<double>(u[i]) * v[i];
        nu += static_cast<double>(u[i]) * u[i];
        nv += static_cast<double>(v[i]) * v[i];
    }
    require(nu > 0.0 && nv > 0.0, ErrorKind::ZeroVector, "cosine of a zero vector");
    return std::clamp(dot / (std::sqrt(nu) * std::sqrt(nv)), 0.0, 1.0);
}

Regions split_regions(const Image& image, const Mask& mask) {
    require(mask.width == image.width && mask.height == image.height, ErrorKind::ShapeMismatch,
            "mask does not match the image");
    const Bbox box = bbox_of(mask);
    Regions r{Image(box.w, box.h, 0.5f), image};
    for (int y = 0; y < image.height; ++y) {
        for (int x = 0; x < image.width; ++x) {
            if (!mask.at(x, y)) continue;
            r.subject.set(x - box.x, y - box.y, image.rgb(x, y));
            r.background.set(x, y, {0.5f, 0.5f, 0.5f});
        }
    }
    return r;
}

double AutoMetrics::geomean() const {
    return std::pow(dino_sub * dino_back * clipi_sub * clipi_back, 0.25);
}

nlohmann::json to_json(const AutoMetrics& m) {
    return {{"dino_sub", m.dino_sub}, {"dino_back", m.dino_back}, {"clipi_sub", m.clipi_sub}, {"clipi_back", m.clipi_back},
            {"overall", m.geomean()}};
}

AutoMetrics auto_metrics_from_json(const nlohmann::json& j) {
    return {j.at("dino_sub").get<double>(), j.at("dino_back").get<double>(), j.at("clipi_sub").get<double>(),
            j.at("clipi_back").get<double>()};
}

AutoMetrics score_example(const Image& generated, const SubjectSet& subject, const Image& source, const Mask& gen_mask,
                          const Mask& src_mask, const EmbedderPair& embedders) {
    require(embedders.a != nullptr && embedders.b != nullptr, ErrorKind::InvalidParameter, "missing embedder");
    require(!subject.images.empty(), ErrorKind::EmptyList, "subject set has no exemplars");
    require(subject.masks.size() == subject.images.size(), ErrorKind::InvalidParameter,
            "subject set lacks exemplar masks");
    const Regions gen = split_regions(generated, gen_mask);
    const Regions src = split_regions(source, src_mask);
    const auto gen_a = embedders.a->embed(gen.subject);
    const auto gen_b = embedders.b->embed(gen.subject);
    AutoMetrics m;
    for (std::size_t i = 0; i < subject.images.size(); ++i) {
        const Image crop = split_regions(subject.images[i], subject.masks[i]).subject;
        m.dino_sub += cosine_sim(gen_a, embedders.a->embed(crop));
        m.clipi_sub += cosine_sim(gen_b, embedders.b->embed(crop));
    }
    m.dino_sub /= static_cast<double>(subject.images.size());
    m.clipi_sub /= static_cast<double>(subject.images.size());
    m.dino_back = cosine_sim(embedders.a->embed(gen.background), embedders.a->embed(src.background));
    m.clipi_back = cosine_sim(embedders.b->embed(gen.background), embedders.b->embed(src.background));
    return m;
}

double overall_auto(std::span<const AutoMetrics> per_example) {
    require(!per_example.empty(), ErrorKind::EmptyList, "no examples to aggregate");
    double acc = 0.0;
    for (const auto& m : per_example) {
        for (double v : {m.dino_sub, m.dino_back, m.clipi_sub, m.clipi_back})
            require(std::isfinite(v) && v >= 0.0 && v <= 1.0, ErrorKind::InvalidParameter, "metric outside [0, 1]");
        acc += m.geomean();
    }
    return acc / static_cast<double>(per_example.size());
}

double overall_human(double subject, double background, double realistic) {
    const auto sub = [](double v) {
        require(v >= 0.0 && v <= 1.0, ErrorKind::InvalidParameter, "aspect score outside [0, 1]");
        return v == 0.0 ? kZeroAspectSubstitute : v;
    };
    return std::cbrt(sub(subject) * sub(background) * sub(realistic));
}

std::string_view to_string(Difficulty d) { return d == Difficulty::Easy ? "easy" : "hard"; }

Difficulty difficulty_from_string(std::string_view name) {
    if (name == "easy") return Difficulty::Easy;
    if (name == "hard") return Difficulty::Hard;
    fail(ErrorKind::Format, "unknown difficulty '" + std::string(name) + "'");
}

SplitReport split_report(std::span<const LabeledResult> results) {
    std::vector<AutoMetrics> easy, hard;
    for (const auto& r : results) {
        require(r.label.has_value(), ErrorKind::UnlabeledResult, "result " + r.id + " has no split label");
        (*r.label == Difficulty::Easy ? easy : hard).push_back(r.metrics);
    }
    const auto stats = [](const std::vector<AutoMetrics>& ms) -> std::optional<SplitStats> {
        if (ms.empty()) return std::nullopt;
        SplitStats s;
        s.count = static_cast<int>(ms.size());
        s.overall = overall_auto(ms);
        for (const auto& m : ms) {
            s.mean.dino_sub += m.dino_sub;
            s.mean.dino_back += m.dino_back;
            s.mean.clipi_sub += m.clipi_sub;
            s.mean.clipi_back += m.clipi_back;
        }
        const double n = static_cast<double>(ms.size());
        s.mean.dino_sub /= n, s.mean.dino_back /= n, s.mean.clipi_sub /= n, s.mean.clipi_back /= n;
        return s;
    };
    SplitReport rep{stats(easy), stats(hard), std::nullopt};
    if (rep.easy && rep.hard) rep.gap = rep.easy->overall - rep.hard->overall;
    return rep;
}

nlohmann::json to_json(const SplitReport& r) {
    const auto split = [](const std::optional<SplitStats>& s) -> nlohmann::json {
        if (!s) return nullptr;
        nlohmann::json j = to_json(s->mean);
        j["count"] = s->count;
        j["overall"] = s->overall;
        return j;
    };
    return {{"easy", split(r.easy)}, {"hard", split(r.hard)}, {"gap", r.gap ? nlohmann::json(*r.gap) : nlohmann::json()}};
}

std::string format_split_table(const SplitReport& r) {
    std::ostringstream s;
    char line[160];
    std::snprintf(line, sizeof line, "%-6s %6s %9s %10s %10s %11s %8s\n", "split", "count", "dino-sub", "dino-back",
                  "clipi-sub", "clipi-back", "overall");
    s << line;
    for (const auto& [name, stats] : {std::pair{"easy", r.easy}, std::pair{"hard", r.hard}}) {
        if (!stats) {
            std::snprintf(line, sizeof line, "%-6s %6s\n", name, "absent");
        } else {
            std::snprintf(line, sizeof line, "%-6s %6d %9.3f %10.3f %10.3f %11.3f %8.3f\n", name, stats->count,
                          stats->mean.dino_sub, stats->mean.dino_back, stats->mean.clipi_sub, stats->mean.clipi_back,
                          stats->overall);
        }
        s << line;
    }
    if (r.gap) {
        std::snprintf(line, sizeof line, "gap (easy - hard) %+.3f\n", *r.gap);
        s << line;
    }
    return s.str();
}

} // namespace dreamedit
