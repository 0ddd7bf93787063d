// Copyright (C) 2026 The DreamEdit Authors
// SPDX-License-Identifier: Apache-2.0

#include "dreamedit/denoiser.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include "dreamedit/error.hpp"
#include "dreamedit/rng.hpp"

namespace dreamedit {

std::string ModelConfig::describe() const {
    std::ostringstream s;
    s << "unet3(size=" << image_size << ",ch=" << base_channels << '/' << mid_channels << '/' << deep_channels
      << ",groups=" << groups << ",emb=" << emb_dim << ",cond=" << cond_dim << ",freqs=" << time_freqs
      << ",vocab=" << vocab_size << ",T=" << timesteps << ')';
    return s.str();
}

namespace {

nlohmann::json config_json(const ModelConfig& c) {
    return {{"image_size", c.image_size},   {"base_channels", c.base_channels}, {"mid_channels", c.mid_channels},
            {"deep_channels", c.deep_channels}, {"groups", c.groups},       {"emb_dim", c.emb_dim},
            {"cond_dim", c.cond_dim},       {"time_freqs", c.time_freqs},       {"vocab_size", c.vocab_size},
            {"timesteps", c.timesteps}};
}

ModelConfig config_from_json(const nlohmann::json& j) {
    ModelConfig c;
    c.image_size = j.at("image_size");
    c.base_channels = j.at("base_channels");
    c.mid_channels = j.at("mid_channels");
    c.deep_channels = j.at("deep_channels");
    c.groups = j.at("groups");
    c.emb_dim = j.at("emb_dim");
    c.cond_dim = j.at("cond_dim");
    c.time_freqs = j.at("time_freqs");
    c.vocab_size = j.at("vocab_size");
    c.timesteps = j.at("timesteps");
    return c;
}

std::uint64_t layout_hash(const ModelConfig& config) {
    nn::NoisePredictor<float> net(config);
    std::uint64_t h = fnv1a(config.describe());
    for (const auto& spec : net.layout().specs()) h = fnv1a(spec.name + ":" + std::to_string(spec.size) + ";", h);
    return h;
}

constexpr char kMagic[8] = {'D', 'R', 'M', 'E', 'D', 'I', 'T', '\0'};
constexpr std::uint32_t kFormatVersion = 1;

} // namespace

State image_to_state(const Image& image) {
    const std::size_t plane = image.pixel_count();
    State s(plane * 3);
    for (std::size_t i = 0; i < plane; ++i)
        for (int c = 0; c < 3; ++c) s[c * plane + i] = image.pixels[i * 3 + c] * 2.0f - 1.0f;
    return s;
}

Image state_to_image(std::span<const float> state, int width, int height) {
    Image image(width, height);
    const std::size_t plane = image.pixel_count();
    require(state.size() == plane * 3, ErrorKind::ShapeMismatch, "state size does not match image size");
    for (std::size_t i = 0; i < plane; ++i)
        for (int c = 0; c < 3; ++c) image.pixels[i * 3 + c] = (state[c * plane + i] + 1.0f) * 0.5f;
    return image;
}

std::uint64_t DenoiserParams::architecture_hash() const { return layout_hash(config); }

bool DenoiserParams::is_bound(int token) const {
    return std::find(bound_tokens.begin(), bound_tokens.end(), token) != bound_tokens.end();
}

std::size_t DenoiserParams::parameter_count() const {
    std::size_t n = 0;
    for (const auto& t : store.tensors) n += t.size();
    return n;
}

std::uint64_t DenoiserParams::weights_hash() const {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (const auto& t : store.tensors)
        h = fnv1a(std::string_view(reinterpret_cast<const char*>(t.data()), t.size() * sizeof(float)), h);
    return h;
}

ModelConfig default_model_config(int image_size, int timesteps) {
    ModelConfig c;
    c.image_size = image_size;
    c.timesteps = timesteps;
    c.vocab_size = Vocabulary::instance().size();
    return c;
}

DenoiserParams init_params(const ModelConfig& config, std::uint64_t seed) {
    require(config.image_size % 16 == 0 && config.image_size >= 16, ErrorKind::InvalidParameter,
            "image size must be a positive multiple of 16");
    require(config.vocab_size > 0, ErrorKind::InvalidParameter, "vocabulary size must be positive");
    nn::NoisePredictor<float> net(config);
    DenoiserParams p;
    p.config = config;
    p.schedule = build_schedule(ScheduleFamily::LinearBeta, config.timesteps);
    Rng rng(seed);
    for (const auto& spec : net.layout().specs()) {
        std::vector<float> values(spec.size, 0.0f);
        if (spec.init == nn::Init::One) {
            std::fill(values.begin(), values.end(), 1.0f);
        } else if (spec.init == nn::Init::Uniform) {
            const double bound = 1.0 / std::sqrt(static_cast<double>(spec.fan_in));
            for (auto& v : values) v = static_cast<float>(rng.uniform(-bound, bound));
        }
        p.store.tensors.push_back(std::move(values));
    }
    return p;
}

void save_params(const std::filesystem::path& path, const DenoiserParams& params) {
    std::ofstream out(path, std::ios::binary);
    require(out.good(), ErrorKind::Io, "cannot write " + path.string());
    const std::string cfg = nlohmann::json{{"model", config_json(params.config)},
                                           {"schedule", to_json(params.schedule)},
                                           {"bound_tokens", params.bound_tokens}}
                                .dump();
    const std::uint64_t hash = params.architecture_hash();
    const auto cfg_len = static_cast<std::uint32_t>(cfg.size());
    const auto count = static_cast<std::uint64_t>(params.parameter_count());
    out.write(kMagic, sizeof kMagic);
    out.write(reinterpret_cast<const char*>(&kFormatVersion), sizeof kFormatVersion);
    out.write(reinterpret_cast<const char*>(&hash), sizeof hash);
    out.write(reinterpret_cast<const char*>(&cfg_len), sizeof cfg_len);
    out.write(cfg.data(), cfg_len);
    out.write(reinterpret_cast<const char*>(&count), sizeof count);
    for (const auto& t : params.store.tensors)
        out.write(reinterpret_cast<const char*>(t.data()), static_cast<std::streamsize>(t.size() * sizeof(float)));
    require(out.good(), ErrorKind::Io, "failed writing " + path.string());
}

DenoiserParams load_params(const std::filesystem::path& path, std::uint64_t expected_hash) {
    std::ifstream in(path, std::ios::binary);
    require(in.good(), ErrorKind::Io, "cannot read " + path.string());
    char magic[8];
    std::uint32_t version = 0, cfg_len = 0;
    std::uint64_t hash = 0, count = 0;
    in.read(magic, sizeof magic);
    require(in.good() && std::memcmp(magic, kMagic, sizeof magic) == 0, ErrorKind::Format, "not a parameter file");
    in.read(reinterpret_cast<char*>(&version), sizeof version);
    require(version == kFormatVersion, ErrorKind::Format, "unsupported parameter file version");
    in.read(reinterpret_cast<char*>(&hash), sizeof hash);
    if (expected_hash != 0 && hash != expected_hash)
        fail(ErrorKind::ArchitectureMismatch, "parameter file architecture does not match the expected model");
    in.read(reinterpret_cast<char*>(&cfg_len), sizeof cfg_len);
    std::string cfg(cfg_len, '\0');
    in.read(cfg.data(), cfg_len);
    DenoiserParams p;
    const auto header = nlohmann::json::parse(cfg);
    p.config = config_from_json(header.at("model"));
    p.schedule = schedule_from_json(header.at("schedule"));
    p.bound_tokens = header.at("bound_tokens").get<std::vector<int>>();
    if (p.architecture_hash() != hash)
        fail(ErrorKind::ArchitectureMismatch, "stored hash does not match this build's layout for the stored config");
    in.read(reinterpret_cast<char*>(&count), sizeof count);
    nn::NoisePredictor<float> net(p.config);
    require(count == net.layout().total(), ErrorKind::Format, "parameter count mismatch");
    for (const auto& spec : net.layout().specs()) {
        std::vector<float> values(spec.size);
        in.read(reinterpret_cast<char*>(values.data()), static_cast<std::streamsize>(spec.size * sizeof(float)));
        p.store.tensors.push_back(std::move(values));
    }
    require(in.good(), ErrorKind::Format, "truncated parameter file");
    return p;
}

ConditionVector encode_prompt(const DenoiserParams& params, const PromptTokens& tokens) {
    tokens.validate();
    for (int id : tokens.ids)
        require(id < params.config.vocab_size, ErrorKind::UnknownToken, "id outside model vocabulary");
    nn::NoisePredictor<float> net(params.config);
    const std::vector<int> ids = tokens.ids;
    return net.encode(params.store, std::span<const std::vector<int>>(&ids, 1)).data;
}

namespace {

nn::Tensor<float> as_batch(std::span<const float> z, int n, int size) {
    nn::Tensor<float> t(3, n, size, size);
    require(z.size() == static_cast<std::size_t>(3) * size * size, ErrorKind::ShapeMismatch,
            "state does not match model input size");
    for (int b = 0; b < n; ++b)
        for (int c = 0; c < 3; ++c) std::copy_n(z.data() + c * t.plane(), t.plane(), t.plane_ptr(c, b));
    return t;
}

nn::Tensor<float> cond_batch(std::span<const ConditionVector* const> conds, int dim) {
    const int n = static_cast<int>(conds.size());
    nn::Tensor<float> t(dim, n, 1, 1);
    for (int b = 0; b < n; ++b) {
        require(static_cast<int>(conds[b]->size()) == dim, ErrorKind::ShapeMismatch, "condition width");
        for (int d = 0; d < dim; ++d) t.data[d * n + b] = (*conds[b])[d];
    }
    return t;
}

void check_timestep(const DenoiserParams& params, int t) {
    require(t >= 0 && t <= params.config.timesteps, ErrorKind::TimestepOutOfRange, "t=" + std::to_string(t));
    require(params.schedule.steps() == params.config.timesteps, ErrorKind::InvalidParameter,
            "parameters carry no schedule for T=" + std::to_string(params.config.timesteps));
}

/// In place: v -> sqrt(1 - abar) z + sqrt(abar) v.
void velocity_to_noise(State& v, std::span<const float> z, int t, const NoiseSchedule& schedule) {
    const auto a = static_cast<float>(schedule.signal_coeff(t));
    const auto s = static_cast<float>(schedule.noise_coeff(t));
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = s * z[i] + a * v[i];
}

} // namespace

State predict_noise(const DenoiserParams& params, std::span<const float> z, int t, const ConditionVector& cond) {
    check_timestep(params, t);
    nn::NoisePredictor<float> net(params.config);
    const ConditionVector* conds[] = {&cond};
    const int ts[] = {t};
    State eps = net.forward(params.store, as_batch(z, 1, params.config.image_size), ts, cond_batch(conds, params.config.cond_dim)).data;
    velocity_to_noise(eps, z, t, params.schedule);
    return eps;
}

State guided_noise(const DenoiserParams& params, std::span<const float> z, int t, const ConditionVector& cond,
                   const ConditionVector& null_cond, float scale) {
    require(scale >= 0.0f, ErrorKind::InvalidParameter, "guidance scale must be >= 0");
    if (scale == 0.0f) return predict_noise(params, z, t, null_cond);
    if (scale == 1.0f) return predict_noise(params, z, t, cond);
    check_timestep(params, t);
    nn::NoisePredictor<float> net(params.config);
    const ConditionVector* conds[] = {&null_cond, &cond};
    const int ts[] = {t, t};
    const auto out = net.forward(params.store, as_batch(z, 2, params.config.image_size), ts, cond_batch(conds, params.config.cond_dim));
    const std::size_t plane = out.plane();
    State eps(z.size());
    for (int c = 0; c < 3; ++c) {
        const float* un = out.plane_ptr(c, 0);
        const float* co = out.plane_ptr(c, 1);
        float* dst = eps.data() + c * plane;
        for (std::size_t i = 0; i < plane; ++i) dst[i] = (1.0f - scale) * un[i] + scale * co[i];
    }
    velocity_to_noise(eps, z, t, params.schedule);
    return eps;
}

void SubjectSet::validate() const {
    require(!images.empty(), ErrorKind::InvalidParameter, "subject set needs at least one exemplar");
    require(prompts.size() == images.size(), ErrorKind::InvalidParameter, "one prompt per exemplar");
    require(masks.empty() || masks.size() == images.size(), ErrorKind::InvalidParameter, "one mask per exemplar");
    const int v = Vocabulary::instance().subject_token();
    for (const auto& p : prompts) {
        p.validate();
        require(p.count(v) == 1, ErrorKind::InvalidParameter, "every exemplar prompt needs the subject token exactly once");
    }
}

nlohmann::json to_json(const TrainConfig& cfg) {
    return {{"steps", cfg.steps},
            {"batch", cfg.batch},
            {"learning_rate", cfg.learning_rate},
            {"optimizer", cfg.optimizer == Optimizer::Adam ? (cfg.beta1 == 0.0 ? "adaptive-rms" : "adam") : "sgd"},
            {"beta1", cfg.beta1},
            {"beta2", cfg.beta2},
            {"grad_clip", cfg.grad_clip},
            {"cond_dropout", cfg.cond_dropout},
            {"seed", cfg.seed},
            {"freeze_embeddings", cfg.freeze_embeddings},
            {"prior_preservation", cfg.prior_preservation}};
}

double smoothed(std::span<const float> curve, int begin, int window) {
    double s = 0.0;
    int n = 0;
    for (int i = begin; i < begin + window && i < static_cast<int>(curve.size()); ++i, ++n) s += curve[i];
    return n == 0 ? 0.0 : s / n;
}

TrainResult train_from(const DenoiserParams& init, std::span<const TrainingPair> dataset, const NoiseSchedule& schedule,
                       const TrainConfig& cfg, std::span<const TrainingPair> prior) {
    require(!dataset.empty(), ErrorKind::EmptyDataset, "training set is empty");
    require(cfg.steps >= 0 && cfg.batch >= 1 && cfg.learning_rate > 0.0, ErrorKind::InvalidParameter,
            "invalid training hyperparameters");
    require(schedule.steps() == init.config.timesteps, ErrorKind::InvalidParameter, "schedule T differs from model T");
    TrainResult result{init, {}};
    if (cfg.steps == 0) return result;
    result.params.schedule = schedule;

    const int size = init.config.image_size;
    const auto prepare = [&](std::span<const TrainingPair> pairs) {
        std::vector<State> states;
        for (const auto& p : pairs) {
            require(p.image.width == size && p.image.height == size, ErrorKind::ShapeMismatch, "training image size");
            p.prompt.validate();
            states.push_back(image_to_state(p.image));
        }
        return states;
    };
    const auto states = prepare(dataset);
    const auto prior_states = prepare(prior);
    const bool use_prior = cfg.prior_preservation && !prior.empty();

    auto& params = result.params;
    nn::NoisePredictor<float> net(params.config);
    auto grad = nn::ParamStore<float>::zeros_like(net.layout());
    auto moment1 = nn::ParamStore<float>::zeros_like(net.layout());
    auto moment2 = nn::ParamStore<float>::zeros_like(net.layout());
    Rng rng(cfg.seed);
    const std::size_t plane = static_cast<std::size_t>(size) * size;

    nn::Tensor<float> z(3, cfg.batch, size, size), velocity(3, cfg.batch, size, size);
    std::vector<int> ts(cfg.batch);
    std::vector<std::vector<int>> prompts(cfg.batch);
    result.loss_curve.reserve(cfg.steps);
    double pow2 = 1.0, pow1 = 1.0;

    for (int step = 0; step < cfg.steps; ++step) {
        for (int b = 0; b < cfg.batch; ++b) {
            const bool from_prior = use_prior && rng.bernoulli(cfg.prior_fraction);
            const auto& pool = from_prior ? prior : dataset;
            const auto& pool_states = from_prior ? prior_states : states;
            const int idx = rng.uniform_int(0, static_cast<int>(pool.size()) - 1);
            const int t = rng.uniform_int(1, schedule.steps());
            const auto a = static_cast<float>(schedule.signal_coeff(t));
            const auto s = static_cast<float>(schedule.noise_coeff(t));
            ts[b] = t;
            for (int c = 0; c < 3; ++c) {
                const float* x = pool_states[idx].data() + c * plane;
                float* zp = z.plane_ptr(c, b);
                float* vp = velocity.plane_ptr(c, b);
                for (std::size_t i = 0; i < plane; ++i) {
                    const auto e = static_cast<float>(rng.normal());
                    zp[i] = a * x[i] + s * e;
                    vp[i] = a * e - s * x[i];
                }
            }
            const bool drop = cfg.cond_dropout > 0.0 && rng.bernoulli(cfg.cond_dropout);
            prompts[b] = drop ? PromptTokens::null().ids : pool[idx].prompt.ids;
        }
        grad.zero();
        const double loss = denoising_loss<float>(net, params.store, &grad, z, ts, prompts, velocity);
        if (!std::isfinite(loss))
            fail(ErrorKind::Divergence, "non-finite loss at step " + std::to_string(step));
        result.loss_curve.push_back(static_cast<float>(loss));
        if (cfg.freeze_embeddings) std::fill(grad[0].begin(), grad[0].end(), 0.0f);

        double norm2 = 0.0;
        for (const auto& g : grad.tensors)
            for (float v : g) norm2 += static_cast<double>(v) * v;
        const double norm = std::sqrt(norm2);
        const float clip = cfg.grad_clip > 0.0 && norm > cfg.grad_clip ? static_cast<float>(cfg.grad_clip / norm) : 1.0f;

        pow1 *= cfg.beta1;
        pow2 *= cfg.beta2;
        const auto lr = static_cast<float>(cfg.learning_rate);
        for (std::size_t k = 0; k < grad.tensors.size(); ++k) {
            auto& w = params.store[static_cast<int>(k)];
            const auto& g = grad[static_cast<int>(k)];
            if (cfg.optimizer == Optimizer::Sgd) {
                for (std::size_t i = 0; i < w.size(); ++i) w[i] -= lr * clip * g[i];
                continue;
            }
            auto& m1 = moment1[static_cast<int>(k)];
            auto& m2 = moment2[static_cast<int>(k)];
            const auto b1 = static_cast<float>(cfg.beta1), b2 = static_cast<float>(cfg.beta2);
            const auto c1 = static_cast<float>(1.0 - pow1), c2 = static_cast<float>(1.0 - pow2);
            for (std::size_t i = 0; i < w.size(); ++i) {
                const float gi = g[i] * clip;
                m1[i] = b1 * m1[i] + (1.0f - b1) * gi;
                m2[i] = b2 * m2[i] + (1.0f - b2) * gi * gi;
                w[i] -= lr * (m1[i] / c1) / (std::sqrt(m2[i] / c2) + static_cast<float>(cfg.epsilon));
            }
        }
        if (cfg.on_progress && (step + 1) % cfg.log_every == 0)
            cfg.on_progress(step + 1, smoothed(result.loss_curve, step + 1 - cfg.log_every, cfg.log_every));
    }
    return result;
}

TrainResult train_base(std::span<const TrainingPair> dataset, const NoiseSchedule& schedule, const ModelConfig& model,
                       const TrainConfig& cfg) {
    require(!dataset.empty(), ErrorKind::EmptyDataset, "training set is empty");
    return train_from(init_params(model, cfg.seed), dataset, schedule, cfg);
}

TrainConfig default_bind_config() {
    TrainConfig cfg;
    cfg.steps = 500;
    cfg.batch = 8;
    cfg.learning_rate = 1e-3;
    cfg.cond_dropout = 0.0;
    cfg.seed = 11;
    return cfg;
}

TrainResult bind_subject(const DenoiserParams& params, const SubjectSet& subject, const NoiseSchedule& schedule,
                         TrainConfig cfg, std::span<const TrainingPair> extra, std::span<const TrainingPair> prior) {
    subject.validate();
    std::vector<TrainingPair> pairs;
    for (std::size_t i = 0; i < subject.images.size(); ++i) pairs.push_back({subject.images[i], subject.prompts[i]});
    pairs.insert(pairs.end(), extra.begin(), extra.end());
    TrainResult result = train_from(params, pairs, schedule, cfg, prior);
    if (cfg.steps == 0) return result;
    const auto& vocab = Vocabulary::instance();
    for (const auto& pair : pairs) {
        for (int tok : {vocab.subject_token(), vocab.background_token()})
            if (pair.prompt.contains(tok) && !result.params.is_bound(tok)) result.params.bound_tokens.push_back(tok);
    }
    std::sort(result.params.bound_tokens.begin(), result.params.bound_tokens.end());
    return result;
}

} // namespace dreamedit
