// Copyright (C) 2026 The DreamEdit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "dreamedit/nn.hpp"

namespace dreamedit {

/// Architecture hyperparameters of the noise predictor. Everything here feeds
/// the architecture hash stored in parameter files.
struct ModelConfig {
    int image_size = 64;
    int base_channels = 16;  // after the 2x pixel unshuffle
    int mid_channels = 32;   // 1/4 resolution
    int deep_channels = 64;  // 1/8 and 1/16 resolution
    int groups = 8;
    int emb_dim = 64;
    int cond_dim = 64;
    int time_freqs = 16;
    int vocab_size = 0;
    int timesteps = 100;  // used to normalize t before the sinusoidal embedding

    std::string describe() const;
};

namespace nn {

/// Small U-shaped network. The input is pixel-unshuffled to half resolution,
/// followed by three 2x downsamplings with additive skips, FiLM conditioning
/// from time + prompt embedding, and a mean-pooled token table as the text
/// encoder.
template <typename S>
class NoisePredictor {
public:
    explicit NoisePredictor(const ModelConfig& cfg) : cfg_(cfg) {
        const int c0 = cfg.base_channels, c1 = cfg.mid_channels, c2 = cfg.deep_channels;
        const int e = cfg.emb_dim;
        token_table_ = layout_.add("text.token_table", static_cast<std::size_t>(cfg.vocab_size) * cfg.cond_dim, 1, Init::Uniform);
        time1_ = Conv2d<S>(layout_, "time.fc1", 2 * cfg.time_freqs, e, 1);
        time2_ = Conv2d<S>(layout_, "time.fc2", e, e, 1);
        cond_proj_ = Conv2d<S>(layout_, "cond.proj", cfg.cond_dim, e, 1);
        stem_ = Conv2d<S>(layout_, "stem", 12, c0, 3);
        down1_ = ResBlock<S>(layout_, "down1", c0, c1, e, cfg.groups);
        down2_ = ResBlock<S>(layout_, "down2", c1, c2, e, cfg.groups);
        mid_ = ResBlock<S>(layout_, "mid", c2, c2, e, cfg.groups);
        up2_ = ResBlock<S>(layout_, "up2", c2, c2, e, cfg.groups);
        reduce2_ = Conv2d<S>(layout_, "reduce2", c2, c1, 1);
        up1_ = ResBlock<S>(layout_, "up1", c1, c1, e, cfg.groups);
        reduce1_ = Conv2d<S>(layout_, "reduce1", c1, c0, 1);
        out_norm_ = GroupNorm<S>(layout_, "out.norm", c0, std::min(cfg.groups, c0));
        out_conv_ = Conv2d<S>(layout_, "out.conv", c0, 12, 3, true);
    }

    const ParamLayout& layout() const { return layout_; }
    const ModelConfig& config() const { return cfg_; }

    /// Mean-pooled token embeddings, one column per prompt: [cond_dim][n][1][1].
    Tensor<S> encode(const ParamStore<S>& p, std::span<const std::vector<int>> prompts) {
        prompts_.assign(prompts.begin(), prompts.end());
        const int n = static_cast<int>(prompts.size());
        Tensor<S> cond(cfg_.cond_dim, n, 1, 1);
        const auto& table = p[token_table_];
        for (int ni = 0; ni < n; ++ni) {
            const auto& toks = prompts[ni];
            require(!toks.empty(), ErrorKind::InvalidParameter, "empty prompt");
            for (int d = 0; d < cfg_.cond_dim; ++d) {
                S acc = 0;
                for (int tok : toks) acc += table[static_cast<std::size_t>(tok) * cfg_.cond_dim + d];
                cond.data[d * n + ni] = toks.size() == 1 ? acc : acc / static_cast<S>(toks.size());
            }
        }
        return cond;
    }

    void encode_backward(ParamStore<S>& g, const Tensor<S>& dcond) const {
        const int n = static_cast<int>(prompts_.size());
        auto& table = g[token_table_];
        for (int ni = 0; ni < n; ++ni) {
            const auto& toks = prompts_[ni];
            const S inv = S(1) / static_cast<S>(toks.size());
            for (int tok : toks)
                for (int d = 0; d < cfg_.cond_dim; ++d)
                    table[static_cast<std::size_t>(tok) * cfg_.cond_dim + d] += dcond.data[d * n + ni] * inv;
        }
    }

    Tensor<S> forward(const ParamStore<S>& p, const Tensor<S>& z, std::span<const int> t, const Tensor<S>& cond) {
        require(z.c == 3 && z.h == cfg_.image_size && z.w == cfg_.image_size, ErrorKind::ShapeMismatch,
                "model input must be 3x" + std::to_string(cfg_.image_size) + "x" + std::to_string(cfg_.image_size));
        require(static_cast<int>(t.size()) == z.n && cond.n == z.n && cond.c == cfg_.cond_dim, ErrorKind::ShapeMismatch,
                "batch size mismatch between state, timesteps and condition");
        // Embedding: MLP(sinusoid(t)) + W cond, then SiLU shared by all blocks.
        Tensor<S> freq(2 * cfg_.time_freqs, z.n, 1, 1);
        for (int ni = 0; ni < z.n; ++ni) {
            const double tn = 1000.0 * t[ni] / cfg_.timesteps;
            for (int k = 0; k < cfg_.time_freqs; ++k) {
                const double w = std::exp(-std::log(10000.0) * k / cfg_.time_freqs);
                freq.data[k * z.n + ni] = static_cast<S>(std::sin(tn * w));
                freq.data[(cfg_.time_freqs + k) * z.n + ni] = static_cast<S>(std::cos(tn * w));
            }
        }
        Tensor<S> emb = time2_.forward(p, time_act_.forward(time1_.forward(p, freq)));
        add_inplace(emb, cond_proj_.forward(p, cond));
        Tensor<S> e = emb_act_.forward(emb);

        top_ = stem_.forward(p, space_to_depth2(z));
        h32_ = down1_.forward(p, avg_pool2(top_), e);
        h16_ = down2_.forward(p, avg_pool2(h32_), e);
        Tensor<S> m8 = mid_.forward(p, avg_pool2(h16_), e);
        Tensor<S> u16 = upsample2(m8);
        add_inplace(u16, h16_);
        Tensor<S> d16 = up2_.forward(p, u16, e);
        Tensor<S> u32 = upsample2(reduce2_.forward(p, d16));
        add_inplace(u32, h32_);
        Tensor<S> d32 = up1_.forward(p, u32, e);
        Tensor<S> utop = upsample2(reduce1_.forward(p, d32));
        add_inplace(utop, top_);
        return depth_to_space2(out_conv_.forward(p, out_act_.forward(out_norm_.forward(p, utop))));
    }

    /// Backpropagates d(loss)/d(eps_hat); returns d(loss)/d(cond).
    Tensor<S> backward(const ParamStore<S>& p, ParamStore<S>& g, const Tensor<S>& dout) {
        Tensor<S> d_e(cfg_.emb_dim, dout.n, 1, 1);
        Tensor<S> dutop = out_norm_.backward(p, g, out_act_.backward(out_conv_.backward(p, g, space_to_depth2(dout))));
        Tensor<S> dtop = dutop;
        Tensor<S> dd32 = reduce1_.backward(p, g, upsample2_backward(dutop));
        Tensor<S> du32 = up1_.backward(p, g, dd32, d_e);
        Tensor<S> dh32 = du32;
        Tensor<S> dd16 = reduce2_.backward(p, g, upsample2_backward(du32));
        Tensor<S> du16 = up2_.backward(p, g, dd16, d_e);
        Tensor<S> dh16 = du16;
        Tensor<S> dm8 = upsample2_backward(du16);
        add_inplace(dh16, avg_pool2_backward(mid_.backward(p, g, dm8, d_e)));
        add_inplace(dh32, avg_pool2_backward(down2_.backward(p, g, dh16, d_e)));
        add_inplace(dtop, avg_pool2_backward(down1_.backward(p, g, dh32, d_e)));
        stem_.backward(p, g, dtop, false);

        Tensor<S> d_emb = emb_act_.backward(d_e);
        Tensor<S> dcond = cond_proj_.backward(p, g, d_emb);
        time1_.backward(p, g, time_act_.backward(time2_.backward(p, g, d_emb)), false);
        return dcond;
    }

private:
    ModelConfig cfg_;
    ParamLayout layout_;
    int token_table_ = -1;
    Conv2d<S> time1_, time2_, cond_proj_;
    SiLU<S> time_act_, emb_act_;
    Conv2d<S> stem_;
    ResBlock<S> down1_, down2_, mid_, up2_, up1_;
    Conv2d<S> reduce2_, reduce1_;
    GroupNorm<S> out_norm_;
    SiLU<S> out_act_;
    Conv2d<S> out_conv_;
    std::vector<std::vector<int>> prompts_;
    Tensor<S> top_, h32_, h16_;
};

} // namespace nn
} // namespace dreamedit
