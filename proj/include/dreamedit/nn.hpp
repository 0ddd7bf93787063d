// Copyright (C) 2026 The DreamEdit Authors
// SPDX-License-Identifier: Apache-2.0

// Minimal CPU building blocks for the conditional noise predictor. Layers keep
// the activations they need for the backward pass, so a network object is a
// per-thread workspace; the parameter values live outside in a ParamStore.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "dreamedit/error.hpp"

namespace dreamedit::nn {

/// Activation tensor stored channel-major: [c][n][h][w].
template <typename S>
struct Tensor {
    int c = 0, n = 0, h = 0, w = 0;
    std::vector<S> data;

    Tensor() = default;
    Tensor(int c_, int n_, int h_, int w_) : c(c_), n(n_), h(h_), w(w_), data(static_cast<std::size_t>(c_) * n_ * h_ * w_, S(0)) {}

    std::size_t plane() const { return static_cast<std::size_t>(h) * w; }
    std::size_t cols() const { return static_cast<std::size_t>(n) * h * w; }
    std::size_t size() const { return data.size(); }
    S* channel(int ci) { return data.data() + ci * cols(); }
    const S* channel(int ci) const { return data.data() + ci * cols(); }
    S* plane_ptr(int ci, int ni) { return data.data() + ci * cols() + ni * plane(); }
    const S* plane_ptr(int ci, int ni) const { return data.data() + ci * cols() + ni * plane(); }
    bool same_shape(const Tensor& o) const { return c == o.c && n == o.n && h == o.h && w == o.w; }
};

template <typename S>
using RowMat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename S>
using MatMap = Eigen::Map<RowMat<S>>;
template <typename S>
using ConstMatMap = Eigen::Map<const RowMat<S>>;

enum class Init { Uniform, Zero, One };

struct ParamSpec {
    std::string name;
    std::size_t size = 0;
    int fan_in = 1;
    Init init = Init::Uniform;
};

/// Ordered list of parameter tensors; the order defines the serialized layout.
class ParamLayout {
public:
    int add(std::string name, std::size_t size, int fan_in, Init init) {
        specs_.push_back({std::move(name), size, fan_in, init});
        return static_cast<int>(specs_.size()) - 1;
    }
    const std::vector<ParamSpec>& specs() const { return specs_; }
    std::size_t total() const {
        std::size_t n = 0;
        for (const auto& s : specs_) n += s.size;
        return n;
    }

private:
    std::vector<ParamSpec> specs_;
};

template <typename S>
struct ParamStore {
    std::vector<std::vector<S>> tensors;

    static ParamStore zeros_like(const ParamLayout& layout) {
        ParamStore p;
        for (const auto& s : layout.specs()) p.tensors.emplace_back(s.size, S(0));
        return p;
    }
    void zero() {
        for (auto& t : tensors) std::fill(t.begin(), t.end(), S(0));
    }
    std::vector<S>& operator[](int i) { return tensors[i]; }
    const std::vector<S>& operator[](int i) const { return tensors[i]; }

    template <typename T>
    ParamStore<T> cast() const {
        ParamStore<T> out;
        for (const auto& t : tensors) out.tensors.emplace_back(t.begin(), t.end());
        return out;
    }
};

// ---------------------------------------------------------------------------

/// 2-D convolution with square kernel (1 or 3), stride 1, same padding.
/// Lowered to a single GEMM over the whole batch via im2col.
template <typename S>
class Conv2d {
public:
    Conv2d() = default;
    Conv2d(ParamLayout& layout, const std::string& name, int cin, int cout, int kernel, bool zero_init = false)
        : cin_(cin), cout_(cout), k_(kernel) {
        require(kernel == 1 || kernel == 3, ErrorKind::InvalidParameter, "kernel must be 1 or 3");
        const int fan_in = cin * kernel * kernel;
        weight_ = layout.add(name + ".weight", static_cast<std::size_t>(cout) * fan_in, fan_in, zero_init ? Init::Zero : Init::Uniform);
        bias_ = layout.add(name + ".bias", cout, fan_in, zero_init ? Init::Zero : Init::Uniform);
    }

    int cin() const { return cin_; }
    int cout() const { return cout_; }

    Tensor<S> forward(const ParamStore<S>& p, const Tensor<S>& x) {
        require(x.c == cin_, ErrorKind::ShapeMismatch, "conv input channels");
        in_shape_ = x;
        in_shape_.data.clear();
        const auto cols = static_cast<Eigen::Index>(x.cols());
        Tensor<S> y(cout_, x.n, x.h, x.w);
        MatMap<S> ym(y.data.data(), cout_, cols);
        ConstMatMap<S> wm(p[weight_].data(), cout_, cin_ * k_ * k_);
        if (k_ == 1) {
            col_ = x.data;
        } else {
            im2col(x);
        }
        ConstMatMap<S> cm(col_.data(), cin_ * k_ * k_, cols);
        ym.noalias() = wm * cm;
        const S* b = p[bias_].data();
        for (int o = 0; o < cout_; ++o) {
            S* row = y.channel(o);
            for (Eigen::Index i = 0; i < cols; ++i) row[i] += b[o];
        }
        return y;
    }

    Tensor<S> backward(const ParamStore<S>& p, ParamStore<S>& g, const Tensor<S>& dy, bool need_dx = true) {
        const auto cols = static_cast<Eigen::Index>(dy.cols());
        ConstMatMap<S> dym(dy.data.data(), cout_, cols);
        ConstMatMap<S> cm(col_.data(), cin_ * k_ * k_, cols);
        MatMap<S> gw(g[weight_].data(), cout_, cin_ * k_ * k_);
        gw.noalias() += dym * cm.transpose();
        S* gb = g[bias_].data();
        // Plain loop: Eigen's vectorized sum peels by pointer alignment, which
        // would make the result depend on where the buffer was allocated.
        for (int o = 0; o < cout_; ++o) {
            const S* row = dy.channel(o);
            S acc = 0;
            for (Eigen::Index i = 0; i < cols; ++i) acc += row[i];
            gb[o] += acc;
        }
        Tensor<S> dx;
        if (!need_dx) return dx;
        ConstMatMap<S> wm(p[weight_].data(), cout_, cin_ * k_ * k_);
        if (k_ == 1) {
            dx = Tensor<S>(cin_, dy.n, dy.h, dy.w);
            MatMap<S> dxm(dx.data.data(), cin_, cols);
            dxm.noalias() = wm.transpose() * dym;
        } else {
            std::vector<S> dcol(static_cast<std::size_t>(cin_) * 9 * cols);
            MatMap<S> dcm(dcol.data(), cin_ * 9, cols);
            dcm.noalias() = wm.transpose() * dym;
            dx = col2im(dcol);
        }
        return dx;
    }

private:
    void im2col(const Tensor<S>& x) {
        const int H = x.h, W = x.w, N = x.n;
        const std::size_t cols = x.cols();
        col_.assign(static_cast<std::size_t>(cin_) * 9 * cols, S(0));
        for (int ci = 0; ci < cin_; ++ci)
            for (int ky = 0; ky < 3; ++ky)
                for (int kx = 0; kx < 3; ++kx) {
                    S* dst = col_.data() + (static_cast<std::size_t>(ci) * 9 + ky * 3 + kx) * cols;
                    const int dy = ky - 1, dx = kx - 1;
                    for (int ni = 0; ni < N; ++ni) {
                        const S* src = x.plane_ptr(ci, ni);
                        S* d = dst + static_cast<std::size_t>(ni) * H * W;
                        const int x0 = std::max(0, -dx), x1 = std::min(W, W - dx);
                        for (int y = 0; y < H; ++y) {
                            const int sy = y + dy;
                            if (sy < 0 || sy >= H) continue;
                            const S* srow = src + static_cast<std::size_t>(sy) * W + dx;
                            S* drow = d + static_cast<std::size_t>(y) * W;
                            std::copy(srow + x0, srow + x1, drow + x0);
                        }
                    }
                }
    }

    Tensor<S> col2im(const std::vector<S>& dcol) const {
        const int H = in_shape_.h, W = in_shape_.w, N = in_shape_.n;
        Tensor<S> dx(cin_, N, H, W);
        const std::size_t cols = dx.cols();
        for (int ci = 0; ci < cin_; ++ci)
            for (int ky = 0; ky < 3; ++ky)
                for (int kx = 0; kx < 3; ++kx) {
                    const S* src = dcol.data() + (static_cast<std::size_t>(ci) * 9 + ky * 3 + kx) * cols;
                    const int dy = ky - 1, ddx = kx - 1;
                    for (int ni = 0; ni < N; ++ni) {
                        S* dst = dx.plane_ptr(ci, ni);
                        const S* s = src + static_cast<std::size_t>(ni) * H * W;
                        const int x0 = std::max(0, -ddx), x1 = std::min(W, W - ddx);
                        for (int y = 0; y < H; ++y) {
                            const int sy = y + dy;
                            if (sy < 0 || sy >= H) continue;
                            S* drow = dst + static_cast<std::size_t>(sy) * W + ddx;
                            const S* srow = s + static_cast<std::size_t>(y) * W;
                            for (int xx = x0; xx < x1; ++xx) drow[xx] += srow[xx];
                        }
                    }
                }
        return dx;
    }

    int cin_ = 0, cout_ = 0, k_ = 1;
    int weight_ = -1, bias_ = -1;
    Tensor<S> in_shape_;
    std::vector<S> col_;
};

/// Group normalization with per-channel affine parameters.
template <typename S>
class GroupNorm {
public:
    GroupNorm() = default;
    GroupNorm(ParamLayout& layout, const std::string& name, int channels, int groups) : c_(channels), g_(groups) {
        require(channels % groups == 0, ErrorKind::InvalidParameter, "channels must divide into groups");
        gamma_ = layout.add(name + ".gamma", channels, 1, Init::One);
        beta_ = layout.add(name + ".beta", channels, 1, Init::Zero);
    }

    Tensor<S> forward(const ParamStore<S>& p, const Tensor<S>& x) {
        require(x.c == c_, ErrorKind::ShapeMismatch, "group norm channels");
        const int per = c_ / g_;
        const std::size_t plane = x.plane();
        const S count = static_cast<S>(per * plane);
        xhat_ = Tensor<S>(x.c, x.n, x.h, x.w);
        inv_std_.assign(static_cast<std::size_t>(x.n) * g_, S(0));
        Tensor<S> y(x.c, x.n, x.h, x.w);
        for (int ni = 0; ni < x.n; ++ni)
            for (int gi = 0; gi < g_; ++gi) {
                S mean = 0;
                for (int ci = gi * per; ci < (gi + 1) * per; ++ci) {
                    const S* v = x.plane_ptr(ci, ni);
                    for (std::size_t i = 0; i < plane; ++i) mean += v[i];
                }
                mean /= count;
                S var = 0;
                for (int ci = gi * per; ci < (gi + 1) * per; ++ci) {
                    const S* v = x.plane_ptr(ci, ni);
                    for (std::size_t i = 0; i < plane; ++i) var += (v[i] - mean) * (v[i] - mean);
                }
                var /= count;
                const S inv = S(1) / std::sqrt(var + S(1e-5));
                inv_std_[ni * g_ + gi] = inv;
                for (int ci = gi * per; ci < (gi + 1) * per; ++ci) {
                    const S* v = x.plane_ptr(ci, ni);
                    S* xh = xhat_.plane_ptr(ci, ni);
                    S* out = y.plane_ptr(ci, ni);
                    const S gm = p[gamma_][ci], bt = p[beta_][ci];
                    for (std::size_t i = 0; i < plane; ++i) {
                        xh[i] = (v[i] - mean) * inv;
                        out[i] = xh[i] * gm + bt;
                    }
                }
            }
        return y;
    }

    Tensor<S> backward(const ParamStore<S>& p, ParamStore<S>& g, const Tensor<S>& dy) {
        const int per = c_ / g_;
        const std::size_t plane = dy.plane();
        const S count = static_cast<S>(per * plane);
        Tensor<S> dx(dy.c, dy.n, dy.h, dy.w);
        for (int ni = 0; ni < dy.n; ++ni)
            for (int gi = 0; gi < g_; ++gi) {
                S sum_d = 0, sum_dx = 0;
                for (int ci = gi * per; ci < (gi + 1) * per; ++ci) {
                    const S* d = dy.plane_ptr(ci, ni);
                    const S* xh = xhat_.plane_ptr(ci, ni);
                    const S gm = p[gamma_][ci];
                    S dg = 0, db = 0;
                    for (std::size_t i = 0; i < plane; ++i) {
                        dg += d[i] * xh[i];
                        db += d[i];
                    }
                    g[gamma_][ci] += dg;
                    g[beta_][ci] += db;
                    sum_d += db * gm;
                    sum_dx += dg * gm;
                }
                const S mean_d = sum_d / count, mean_dx = sum_dx / count;
                const S inv = inv_std_[ni * g_ + gi];
                for (int ci = gi * per; ci < (gi + 1) * per; ++ci) {
                    const S* d = dy.plane_ptr(ci, ni);
                    const S* xh = xhat_.plane_ptr(ci, ni);
                    S* out = dx.plane_ptr(ci, ni);
                    const S gm = p[gamma_][ci];
                    for (std::size_t i = 0; i < plane; ++i) out[i] = inv * (d[i] * gm - mean_d - xh[i] * mean_dx);
                }
            }
        return dx;
    }

private:
    int c_ = 0, g_ = 1;
    int gamma_ = -1, beta_ = -1;
    Tensor<S> xhat_;
    std::vector<S> inv_std_;
};

template <typename S>
class SiLU {
public:
    Tensor<S> forward(const Tensor<S>& x) {
        x_ = x;
        Tensor<S> y = x;
        for (auto& v : y.data) v = v / (S(1) + std::exp(-v));
        return y;
    }
    Tensor<S> backward(const Tensor<S>& dy) const {
        Tensor<S> dx = dy;
        for (std::size_t i = 0; i < dx.data.size(); ++i) {
            const S s = S(1) / (S(1) + std::exp(-x_.data[i]));
            dx.data[i] *= s * (S(1) + x_.data[i] * (S(1) - s));
        }
        return dx;
    }

private:
    Tensor<S> x_;
};

template <typename S>
Tensor<S> avg_pool2(const Tensor<S>& x) {
    Tensor<S> y(x.c, x.n, x.h / 2, x.w / 2);
    for (int ci = 0; ci < x.c; ++ci)
        for (int ni = 0; ni < x.n; ++ni) {
            const S* src = x.plane_ptr(ci, ni);
            S* dst = y.plane_ptr(ci, ni);
            for (int yy = 0; yy < y.h; ++yy)
                for (int xx = 0; xx < y.w; ++xx) {
                    const S* s = src + static_cast<std::size_t>(2 * yy) * x.w + 2 * xx;
                    dst[yy * y.w + xx] = S(0.25) * (s[0] + s[1] + s[x.w] + s[x.w + 1]);
                }
        }
    return y;
}

template <typename S>
Tensor<S> avg_pool2_backward(const Tensor<S>& dy) {
    Tensor<S> dx(dy.c, dy.n, dy.h * 2, dy.w * 2);
    for (int ci = 0; ci < dy.c; ++ci)
        for (int ni = 0; ni < dy.n; ++ni) {
            const S* src = dy.plane_ptr(ci, ni);
            S* dst = dx.plane_ptr(ci, ni);
            for (int yy = 0; yy < dx.h; ++yy)
                for (int xx = 0; xx < dx.w; ++xx) dst[yy * dx.w + xx] = S(0.25) * src[(yy / 2) * dy.w + xx / 2];
        }
    return dx;
}

template <typename S>
Tensor<S> upsample2(const Tensor<S>& x) {
    Tensor<S> y(x.c, x.n, x.h * 2, x.w * 2);
    for (int ci = 0; ci < x.c; ++ci)
        for (int ni = 0; ni < x.n; ++ni) {
            const S* src = x.plane_ptr(ci, ni);
            S* dst = y.plane_ptr(ci, ni);
            for (int yy = 0; yy < y.h; ++yy)
                for (int xx = 0; xx < y.w; ++xx) dst[yy * y.w + xx] = src[(yy / 2) * x.w + xx / 2];
        }
    return y;
}

template <typename S>
Tensor<S> upsample2_backward(const Tensor<S>& dy) {
    Tensor<S> dx(dy.c, dy.n, dy.h / 2, dy.w / 2);
    for (int ci = 0; ci < dy.c; ++ci)
        for (int ni = 0; ni < dy.n; ++ni) {
            const S* src = dy.plane_ptr(ci, ni);
            S* dst = dx.plane_ptr(ci, ni);
            for (int yy = 0; yy < dy.h; ++yy)
                for (int xx = 0; xx < dy.w; ++xx) dst[(yy / 2) * dx.w + xx / 2] += src[yy * dy.w + xx];
        }
    return dx;
}

/// Pixel unshuffle by 2: [c][n][h][w] -> [4c][n][h/2][w/2], channel c*4 + dy*2 + dx.
template <typename S>
Tensor<S> space_to_depth2(const Tensor<S>& x) {
    Tensor<S> y(x.c * 4, x.n, x.h / 2, x.w / 2);
    for (int ci = 0; ci < x.c; ++ci)
        for (int ni = 0; ni < x.n; ++ni) {
            const S* src = x.plane_ptr(ci, ni);
            for (int k = 0; k < 4; ++k) {
                S* dst = y.plane_ptr(ci * 4 + k, ni);
                const int dy = k / 2, dx = k % 2;
                for (int yy = 0; yy < y.h; ++yy)
                    for (int xx = 0; xx < y.w; ++xx) dst[yy * y.w + xx] = src[(2 * yy + dy) * x.w + 2 * xx + dx];
            }
        }
    return y;
}

template <typename S>
Tensor<S> depth_to_space2(const Tensor<S>& x) {
    Tensor<S> y(x.c / 4, x.n, x.h * 2, x.w * 2);
    for (int ci = 0; ci < y.c; ++ci)
        for (int ni = 0; ni < x.n; ++ni) {
            S* dst = y.plane_ptr(ci, ni);
            for (int k = 0; k < 4; ++k) {
                const S* src = x.plane_ptr(ci * 4 + k, ni);
                const int dy = k / 2, dx = k % 2;
                for (int yy = 0; yy < x.h; ++yy)
                    for (int xx = 0; xx < x.w; ++xx) dst[(2 * yy + dy) * y.w + 2 * xx + dx] = src[yy * x.w + xx];
            }
        }
    return y;
}

template <typename S>
void add_inplace(Tensor<S>& a, const Tensor<S>& b) {
    require(a.size() == b.size(), ErrorKind::ShapeMismatch, "tensor add");
    for (std::size_t i = 0; i < a.size(); ++i) a.data[i] += b.data[i];
}

/// Residual block whose second normalization is modulated per sample by a
/// scale/shift pair projected from the shared embedding.
template <typename S>
class ResBlock {
public:
    ResBlock() = default;
    ResBlock(ParamLayout& layout, const std::string& name, int cin, int cout, int emb_dim, int groups)
        : cin_(cin), cout_(cout),
          norm1_(layout, name + ".norm1", cin, std::min(groups, cin)),
          conv1_(layout, name + ".conv1", cin, cout, 3),
          film_(layout, name + ".film", emb_dim, 2 * cout, 1, true),
          norm2_(layout, name + ".norm2", cout, std::min(groups, cout)),
          conv2_(layout, name + ".conv2", cout, cout, 3, true) {
        if (cin != cout) skip_ = Conv2d<S>(layout, name + ".skip", cin, cout, 1);
    }

    /// `emb_act` is [emb_dim][n][1][1], already passed through SiLU.
    Tensor<S> forward(const ParamStore<S>& p, const Tensor<S>& x, const Tensor<S>& emb_act) {
        Tensor<S> h = conv1_.forward(p, act1_.forward(norm1_.forward(p, x)));
        film_out_ = film_.forward(p, emb_act);
        normed_ = norm2_.forward(p, h);
        Tensor<S> m(normed_.c, normed_.n, normed_.h, normed_.w);
        const std::size_t plane = m.plane();
        for (int ci = 0; ci < cout_; ++ci)
            for (int ni = 0; ni < m.n; ++ni) {
                const S scale = S(1) + film_out_.data[ci * m.n + ni];
                const S shift = film_out_.data[(cout_ + ci) * m.n + ni];
                const S* src = normed_.plane_ptr(ci, ni);
                S* dst = m.plane_ptr(ci, ni);
                for (std::size_t i = 0; i < plane; ++i) dst[i] = src[i] * scale + shift;
            }
        Tensor<S> out = conv2_.forward(p, act2_.forward(m));
        add_inplace(out, cin_ == cout_ ? x : skip_.forward(p, x));
        return out;
    }

    /// Returns dx; accumulates the embedding gradient into `d_emb_act`.
    Tensor<S> backward(const ParamStore<S>& p, ParamStore<S>& g, const Tensor<S>& dout, Tensor<S>& d_emb_act) {
        Tensor<S> dm = act2_.backward(conv2_.backward(p, g, dout));
        Tensor<S> dfilm(film_out_.c, film_out_.n, 1, 1);
        Tensor<S> dnormed(dm.c, dm.n, dm.h, dm.w);
        const std::size_t plane = dm.plane();
        for (int ci = 0; ci < cout_; ++ci)
            for (int ni = 0; ni < dm.n; ++ni) {
                const S scale = S(1) + film_out_.data[ci * dm.n + ni];
                const S* d = dm.plane_ptr(ci, ni);
                const S* nv = normed_.plane_ptr(ci, ni);
                S* dn = dnormed.plane_ptr(ci, ni);
                S ds = 0, db = 0;
                for (std::size_t i = 0; i < plane; ++i) {
                    ds += d[i] * nv[i];
                    db += d[i];
                    dn[i] = d[i] * scale;
                }
                dfilm.data[ci * dm.n + ni] = ds;
                dfilm.data[(cout_ + ci) * dm.n + ni] = db;
            }
        add_inplace(d_emb_act, film_.backward(p, g, dfilm));
        Tensor<S> dh = conv1_.backward(p, g, norm2_.backward(p, g, dnormed));
        Tensor<S> dx = norm1_.backward(p, g, act1_.backward(dh));
        add_inplace(dx, cin_ == cout_ ? dout : skip_.backward(p, g, dout));
        return dx;
    }

private:
    int cin_ = 0, cout_ = 0;
    GroupNorm<S> norm1_;
    SiLU<S> act1_;
    Conv2d<S> conv1_;
    Conv2d<S> film_;
    GroupNorm<S> norm2_;
    SiLU<S> act2_;
    Conv2d<S> conv2_;
    Conv2d<S> skip_;
    Tensor<S> film_out_;
    Tensor<S> normed_;
};

} // namespace dreamedit::nn
