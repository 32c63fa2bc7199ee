#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <memory>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "coughpipe/nn/tensor.hpp"

namespace coughpipe::nn {

enum class LayerKind {
    Conv2d,
    MaxPool2x2,
    Dense,
    Relu,
    Softmax,
    Dropout,
    Flatten,
    Lstm,
    ResidualBlock,
    BatchNorm,
    GlobalAvgPool,
};

/// Declarative layer description; only the fields relevant to `kind` are
/// meaningful.
struct LayerSpec {
    LayerKind kind = LayerKind::Relu;
    int filters = 0;       // conv2d
    int kernel = 0;        // conv2d
    int stride = 1;        // conv2d, residual_block
    bool same_padding = false;  // conv2d
    int units = 0;         // dense, lstm
    double rate = 0.0;     // dropout
    bool return_sequences = false;  // lstm
    int channels = 0;      // residual_block output channels

    static LayerSpec conv2d(int filters, int kernel, int stride = 1, bool same = false) {
        LayerSpec s;
        s.kind = LayerKind::Conv2d;
        s.filters = filters;
        s.kernel = kernel;
        s.stride = stride;
        s.same_padding = same;
        return s;
    }
    static LayerSpec maxpool() { return {LayerKind::MaxPool2x2}; }
    static LayerSpec dense(int units) {
        LayerSpec s;
        s.kind = LayerKind::Dense;
        s.units = units;
        return s;
    }
    static LayerSpec relu() { return {LayerKind::Relu}; }
    static LayerSpec softmax() { return {LayerKind::Softmax}; }
    static LayerSpec dropout(double rate) {
        LayerSpec s;
        s.kind = LayerKind::Dropout;
        s.rate = rate;
        return s;
    }
    static LayerSpec flatten() { return {LayerKind::Flatten}; }
    static LayerSpec lstm(int units, bool return_sequences = false) {
        LayerSpec s;
        s.kind = LayerKind::Lstm;
        s.units = units;
        s.return_sequences = return_sequences;
        return s;
    }
    static LayerSpec residual_block(int channels, int stride = 1) {
        LayerSpec s;
        s.kind = LayerKind::ResidualBlock;
        s.channels = channels;
        s.stride = stride;
        return s;
    }
    static LayerSpec batchnorm() { return {LayerKind::BatchNorm}; }
    static LayerSpec global_avg_pool() { return {LayerKind::GlobalAvgPool}; }
};

inline const char* layer_kind_name(LayerKind k) {
    switch (k) {
        case LayerKind::Conv2d: return "conv2d";
        case LayerKind::MaxPool2x2: return "maxpool2x2";
        case LayerKind::Dense: return "dense";
        case LayerKind::Relu: return "relu";
        case LayerKind::Softmax: return "softmax";
        case LayerKind::Dropout: return "dropout";
        case LayerKind::Flatten: return "flatten";
        case LayerKind::Lstm: return "lstm";
        case LayerKind::ResidualBlock: return "residual_block";
        case LayerKind::BatchNorm: return "batchnorm";
        case LayerKind::GlobalAvgPool: return "global_avg_pool";
    }
    return "?";
}

/// Named parameter tensor plus its gradient. Non-trainable blocks
/// (batchnorm running stats) are serialized but skipped by the optimizer
/// and the gradient check.
struct ParamBlock {
    std::string name;
    Tensor value;
    Tensor grad;
    bool trainable = true;

    explicit ParamBlock(std::string n, std::vector<std::size_t> shape, bool train = true)
        : name(std::move(n)), value(shape), grad(std::move(shape)), trainable(train) {}
};

namespace init {

inline void he_uniform(Tensor& t, std::size_t fan_in, std::mt19937_64& rng) {
    const double limit = std::sqrt(6.0 / static_cast<double>(fan_in));
    std::uniform_real_distribution<double> d(-limit, limit);
    for (auto& v : t.data) v = d(rng);
}

inline void uniform_fan_in(Tensor& t, std::size_t fan_in, std::mt19937_64& rng) {
    const double limit = 1.0 / std::sqrt(static_cast<double>(fan_in));
    std::uniform_real_distribution<double> d(-limit, limit);
    for (auto& v : t.data) v = d(rng);
}

}  // namespace init

class Layer {
public:
    virtual ~Layer() = default;
    virtual Tensor forward(const Tensor& x, bool training) = 0;
    virtual Tensor backward(const Tensor& dy) = 0;
    virtual std::vector<ParamBlock*> param_blocks() { return {}; }
    virtual LayerKind kind() const = 0;
};

// ---------------------------------------------------------------------------

class DenseLayer final : public Layer {
public:
    DenseLayer(std::size_t in, std::size_t out, std::mt19937_64& rng)
        : w_("w", {in, out}), b_("b", {out}) {
        init::he_uniform(w_.value, in, rng);
    }

    Tensor forward(const Tensor& x, bool) override {
        if (x.ndim() != 2 || x.dim(1) != w_.value.dim(0)) {
            throw std::invalid_argument("dense: input shape " + x.shape_string() + " does not match weights");
        }
        x_ = x;
        const std::size_t batch = x.dim(0), in = w_.value.dim(0), out = w_.value.dim(1);
        Tensor y({batch, out});
        for (std::size_t i = 0; i < batch; ++i) {
            for (std::size_t o = 0; o < out; ++o) y.at2(i, o) = b_.value[o];
            for (std::size_t k = 0; k < in; ++k) {
                const double xv = x.at2(i, k);
                if (xv == 0.0) continue;
                const double* wrow = &w_.value.data[k * out];
                double* yrow = &y.data[i * out];
                for (std::size_t o = 0; o < out; ++o) yrow[o] += xv * wrow[o];
            }
        }
        return y;
    }

    Tensor backward(const Tensor& dy) override {
        const std::size_t batch = x_.dim(0), in = w_.value.dim(0), out = w_.value.dim(1);
        Tensor dx({batch, in});
        for (std::size_t i = 0; i < batch; ++i) {
            const double* dyrow = &dy.data[i * out];
            for (std::size_t o = 0; o < out; ++o) b_.grad[o] += dyrow[o];
            for (std::size_t k = 0; k < in; ++k) {
                const double xv = x_.at2(i, k);
                double* wgrow = &w_.grad.data[k * out];
                const double* wrow = &w_.value.data[k * out];
                double acc = 0.0;
                for (std::size_t o = 0; o < out; ++o) {
                    wgrow[o] += xv * dyrow[o];
                    acc += wrow[o] * dyrow[o];
                }
                dx.at2(i, k) = acc;
            }
        }
        return dx;
    }

    std::vector<ParamBlock*> param_blocks() override { return {&w_, &b_}; }
    LayerKind kind() const override { return LayerKind::Dense; }

private:
    ParamBlock w_, b_;
    Tensor x_;
};

class ReluLayer final : public Layer {
public:
    Tensor forward(const Tensor& x, bool) override {
        mask_.assign(x.size(), 0);
        Tensor y = x;
        for (std::size_t i = 0; i < y.size(); ++i) {
            if (y[i] > 0.0) {
                mask_[i] = 1;
            } else {
                y[i] = 0.0;
            }
        }
        return y;
    }
    Tensor backward(const Tensor& dy) override {
        Tensor dx = dy;
        for (std::size_t i = 0; i < dx.size(); ++i) {
            if (!mask_[i]) dx[i] = 0.0;
        }
        return dx;
    }
    LayerKind kind() const override { return LayerKind::Relu; }

private:
    std::vector<char> mask_;
};

class SoftmaxLayer final : public Layer {
public:
    Tensor forward(const Tensor& x, bool) override {
        if (x.ndim() != 2) throw std::invalid_argument("softmax: expected 2-D input");
        Tensor y = x;
        const std::size_t batch = x.dim(0), n = x.dim(1);
        for (std::size_t i = 0; i < batch; ++i) {
            double* row = &y.data[i * n];
            const double mx = *std::max_element(row, row + n);
            double sum = 0.0;
            for (std::size_t j = 0; j < n; ++j) {
                row[j] = std::exp(row[j] - mx);
                sum += row[j];
            }
            for (std::size_t j = 0; j < n; ++j) row[j] /= sum;
        }
        probs_ = y;
        return y;
    }

    Tensor backward(const Tensor& dy) override {
        const std::size_t batch = probs_.dim(0), n = probs_.dim(1);
        Tensor dx({batch, n});
        for (std::size_t i = 0; i < batch; ++i) {
            double dot = 0.0;
            for (std::size_t j = 0; j < n; ++j) dot += dy.at2(i, j) * probs_.at2(i, j);
            for (std::size_t j = 0; j < n; ++j) {
                dx.at2(i, j) = probs_.at2(i, j) * (dy.at2(i, j) - dot);
            }
        }
        return dx;
    }

    const Tensor& probabilities() const { return probs_; }
    LayerKind kind() const override { return LayerKind::Softmax; }

private:
    Tensor probs_;
};

class DropoutLayer final : public Layer {
public:
    DropoutLayer(double rate, std::mt19937_64& rng) : rate_(rate), rng_(&rng) {
        if (rate < 0.0 || rate >= 1.0) throw std::invalid_argument("dropout: rate must be in [0, 1)");
    }

    Tensor forward(const Tensor& x, bool training) override {
        active_ = training && enabled_ && rate_ > 0.0;
        if (!active_) return x;
        // inverted dropout: scale kept units so inference needs no rescaling
        const double keep = 1.0 - rate_;
        std::bernoulli_distribution d(keep);
        mask_.assign(x.size(), 0.0);
        Tensor y = x;
        for (std::size_t i = 0; i < x.size(); ++i) {
            if (d(*rng_)) {
                mask_[i] = 1.0 / keep;
                y[i] *= mask_[i];
            } else {
                y[i] = 0.0;
            }
        }
        return y;
    }

    Tensor backward(const Tensor& dy) override {
        if (!active_) return dy;
        Tensor dx = dy;
        for (std::size_t i = 0; i < dx.size(); ++i) dx[i] *= mask_[i];
        return dx;
    }

    void set_enabled(bool e) { enabled_ = e; }
    LayerKind kind() const override { return LayerKind::Dropout; }

private:
    double rate_;
    std::mt19937_64* rng_;
    std::vector<double> mask_;
    bool active_ = false;
    bool enabled_ = true;
};

class FlattenLayer final : public Layer {
public:
    Tensor forward(const Tensor& x, bool) override {
        in_shape_ = x.shape;
        return x.reshaped({x.dim(0), x.size() / x.dim(0)});
    }
    Tensor backward(const Tensor& dy) override { return dy.reshaped(in_shape_); }
    LayerKind kind() const override { return LayerKind::Flatten; }

private:
    std::vector<std::size_t> in_shape_;
};

class MaxPoolLayer final : public Layer {
public:
    Tensor forward(const Tensor& x, bool) override {
        if (x.ndim() != 4) throw std::invalid_argument("maxpool2x2: expected 4-D input");
        const std::size_t b = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
        if (h < 2 || w < 2) throw std::invalid_argument("maxpool2x2: input too small " + x.shape_string());
        const std::size_t oh = h / 2, ow = w / 2;
        in_shape_ = x.shape;
        argmax_.assign(b * c * oh * ow, 0);
        Tensor y({b, c, oh, ow});
        std::size_t oi = 0;
        for (std::size_t bi = 0; bi < b; ++bi) {
            for (std::size_t ci = 0; ci < c; ++ci) {
                for (std::size_t yo = 0; yo < oh; ++yo) {
                    for (std::size_t xo = 0; xo < ow; ++xo, ++oi) {
                        double best = -1e300;
                        std::size_t best_idx = 0;
                        for (std::size_t dy = 0; dy < 2; ++dy) {
                            for (std::size_t dx = 0; dx < 2; ++dx) {
                                const std::size_t idx = ((bi * c + ci) * h + yo * 2 + dy) * w + xo * 2 + dx;
                                if (x.data[idx] > best) {
                                    best = x.data[idx];
                                    best_idx = idx;
                                }
                            }
                        }
                        y.data[oi] = best;
                        argmax_[oi] = best_idx;
                    }
                }
            }
        }
        return y;
    }

    Tensor backward(const Tensor& dy) override {
        Tensor dx(in_shape_);
        for (std::size_t i = 0; i < dy.size(); ++i) dx.data[argmax_[i]] += dy.data[i];
        return dx;
    }
    LayerKind kind() const override { return LayerKind::MaxPool2x2; }

private:
    std::vector<std::size_t> in_shape_;
    std::vector<std::size_t> argmax_;
};

struct ConvGeometry {
    std::size_t out_h = 0, out_w = 0;
    long long pad_top = 0, pad_left = 0;
};

inline ConvGeometry conv_geometry(std::size_t h, std::size_t w, int kernel, int stride, bool same) {
    ConvGeometry g;
    const auto k = static_cast<long long>(kernel);
    const auto s = static_cast<long long>(stride);
    if (same) {
        g.out_h = static_cast<std::size_t>((static_cast<long long>(h) + s - 1) / s);
        g.out_w = static_cast<std::size_t>((static_cast<long long>(w) + s - 1) / s);
        const long long pad_h = std::max(0ll, (static_cast<long long>(g.out_h) - 1) * s + k - static_cast<long long>(h));
        const long long pad_w = std::max(0ll, (static_cast<long long>(g.out_w) - 1) * s + k - static_cast<long long>(w));
        g.pad_top = pad_h / 2;
        g.pad_left = pad_w / 2;
    } else {
        if (static_cast<long long>(h) < k || static_cast<long long>(w) < k) {
            throw std::invalid_argument("conv2d: input smaller than kernel");
        }
        g.out_h = static_cast<std::size_t>((static_cast<long long>(h) - k) / s + 1);
        g.out_w = static_cast<std::size_t>((static_cast<long long>(w) - k) / s + 1);
    }
    return g;
}

class Conv2dLayer final : public Layer {
public:
    Conv2dLayer(std::size_t in_channels, int filters, int kernel, int stride, bool same, std::mt19937_64& rng)
        : w_("w", {static_cast<std::size_t>(filters), in_channels, static_cast<std::size_t>(kernel),
                   static_cast<std::size_t>(kernel)}),
          b_("b", {static_cast<std::size_t>(filters)}),
          kernel_(kernel),
          stride_(stride),
          same_(same) {
        init::he_uniform(w_.value, in_channels * kernel * kernel, rng);
    }

    Tensor forward(const Tensor& x, bool) override {
        if (x.ndim() != 4 || x.dim(1) != w_.value.dim(1)) {
            throw std::invalid_argument("conv2d: input shape " + x.shape_string() + " does not match weights");
        }
        x_ = x;
        const std::size_t b = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
        const std::size_t f = w_.value.dim(0);
        geo_ = conv_geometry(h, w, kernel_, stride_, same_);
        Tensor y({b, f, geo_.out_h, geo_.out_w});

        for (std::size_t bi = 0; bi < b; ++bi) {
            for (std::size_t fi = 0; fi < f; ++fi) {
                double* ybase = &y.data[(bi * f + fi) * geo_.out_h * geo_.out_w];
                const double bias = b_.value[fi];
                for (std::size_t i = 0; i < geo_.out_h * geo_.out_w; ++i) ybase[i] = bias;
                for (std::size_t ci = 0; ci < c; ++ci) {
                    const double* xbase = &x.data[(bi * c + ci) * h * w];
                    for (int ky = 0; ky < kernel_; ++ky) {
                        for (int kx = 0; kx < kernel_; ++kx) {
                            const double wv = w_.value.at4(fi, ci, static_cast<std::size_t>(ky),
                                                           static_cast<std::size_t>(kx));
                            if (wv == 0.0) continue;
                            for (std::size_t oy = 0; oy < geo_.out_h; ++oy) {
                                const long long iy = static_cast<long long>(oy) * stride_ + ky - geo_.pad_top;
                                if (iy < 0 || iy >= static_cast<long long>(h)) continue;
                                const double* xrow = xbase + static_cast<std::size_t>(iy) * w;
                                double* yrow = ybase + oy * geo_.out_w;
                                for (std::size_t ox = 0; ox < geo_.out_w; ++ox) {
                                    const long long ix = static_cast<long long>(ox) * stride_ + kx - geo_.pad_left;
                                    if (ix < 0 || ix >= static_cast<long long>(w)) continue;
                                    yrow[ox] += wv * xrow[static_cast<std::size_t>(ix)];
                                }
                            }
                        }
                    }
                }
            }
        }
        return y;
    }

    Tensor backward(const Tensor& dy) override {
        const std::size_t b = x_.dim(0), c = x_.dim(1), h = x_.dim(2), w = x_.dim(3);
        const std::size_t f = w_.value.dim(0);
        Tensor dx(x_.shape);
        for (std::size_t bi = 0; bi < b; ++bi) {
            for (std::size_t fi = 0; fi < f; ++fi) {
                const double* dybase = &dy.data[(bi * f + fi) * geo_.out_h * geo_.out_w];
                for (std::size_t i = 0; i < geo_.out_h * geo_.out_w; ++i) b_.grad[fi] += dybase[i];
                for (std::size_t ci = 0; ci < c; ++ci) {
                    const double* xbase = &x_.data[(bi * c + ci) * h * w];
                    double* dxbase = &dx.data[(bi * c + ci) * h * w];
                    for (int ky = 0; ky < kernel_; ++ky) {
                        for (int kx = 0; kx < kernel_; ++kx) {
                            const double wv = w_.value.at4(fi, ci, static_cast<std::size_t>(ky),
                                                           static_cast<std::size_t>(kx));
                            double wgrad = 0.0;
                            for (std::size_t oy = 0; oy < geo_.out_h; ++oy) {
                                const long long iy = static_cast<long long>(oy) * stride_ + ky - geo_.pad_top;
                                if (iy < 0 || iy >= static_cast<long long>(h)) continue;
                                const double* xrow = xbase + static_cast<std::size_t>(iy) * w;
                                double* dxrow = dxbase + static_cast<std::size_t>(iy) * w;
                                const double* dyrow = dybase + oy * geo_.out_w;
                                for (std::size_t ox = 0; ox < geo_.out_w; ++ox) {
                                    const long long ix = static_cast<long long>(ox) * stride_ + kx - geo_.pad_left;
                                    if (ix < 0 || ix >= static_cast<long long>(w)) continue;
                                    wgrad += dyrow[ox] * xrow[static_cast<std::size_t>(ix)];
                                    dxrow[static_cast<std::size_t>(ix)] += dyrow[ox] * wv;
                                }
                            }
                            w_.grad.at4(fi, ci, static_cast<std::size_t>(ky), static_cast<std::size_t>(kx)) += wgrad;
                        }
                    }
                }
            }
        }
        return dx;
    }

    std::vector<ParamBlock*> param_blocks() override { return {&w_, &b_}; }
    LayerKind kind() const override { return LayerKind::Conv2d; }

private:
    ParamBlock w_, b_;
    int kernel_, stride_;
    bool same_;
    Tensor x_;
    ConvGeometry geo_;
};

class BatchNormLayer final : public Layer {
public:
    explicit BatchNormLayer(std::size_t channels)
        : gamma_("gamma", {channels}),
          beta_("beta", {channels}),
          running_mean_("running_mean", {channels}, false),
          running_var_("running_var", {channels}, false) {
        for (auto& v : gamma_.value.data) v = 1.0;
        for (auto& v : running_var_.value.data) v = 1.0;
    }

    Tensor forward(const Tensor& x, bool training) override {
        if (x.ndim() != 4 || x.dim(1) != gamma_.value.dim(0)) {
            throw std::invalid_argument("batchnorm: input shape " + x.shape_string() + " does not match channels");
        }
        x_ = x;
        training_ = training;
        const std::size_t b = x.dim(0), c = x.dim(1), hw = x.dim(2) * x.dim(3);
        const auto n = static_cast<double>(b * hw);
        mean_.assign(c, 0.0);
        var_.assign(c, 0.0);
        if (training) {
            for (std::size_t bi = 0; bi < b; ++bi) {
                for (std::size_t ci = 0; ci < c; ++ci) {
                    const double* p = &x.data[(bi * c + ci) * hw];
                    for (std::size_t i = 0; i < hw; ++i) mean_[ci] += p[i];
                }
            }
            for (std::size_t ci = 0; ci < c; ++ci) mean_[ci] /= n;
            for (std::size_t bi = 0; bi < b; ++bi) {
                for (std::size_t ci = 0; ci < c; ++ci) {
                    const double* p = &x.data[(bi * c + ci) * hw];
                    for (std::size_t i = 0; i < hw; ++i) {
                        const double d = p[i] - mean_[ci];
                        var_[ci] += d * d;
                    }
                }
            }
            for (std::size_t ci = 0; ci < c; ++ci) var_[ci] /= n;
            for (std::size_t ci = 0; ci < c; ++ci) {
                running_mean_.value[ci] = (1.0 - momentum_) * running_mean_.value[ci] + momentum_ * mean_[ci];
                running_var_.value[ci] = (1.0 - momentum_) * running_var_.value[ci] + momentum_ * var_[ci];
            }
        } else {
            for (std::size_t ci = 0; ci < c; ++ci) {
                mean_[ci] = running_mean_.value[ci];
                var_[ci] = running_var_.value[ci];
            }
        }

        inv_std_.resize(c);
        for (std::size_t ci = 0; ci < c; ++ci) inv_std_[ci] = 1.0 / std::sqrt(var_[ci] + eps_);
        xhat_ = Tensor(x.shape);
        Tensor y(x.shape);
        for (std::size_t bi = 0; bi < b; ++bi) {
            for (std::size_t ci = 0; ci < c; ++ci) {
                const double* p = &x.data[(bi * c + ci) * hw];
                double* xh = &xhat_.data[(bi * c + ci) * hw];
                double* yo = &y.data[(bi * c + ci) * hw];
                for (std::size_t i = 0; i < hw; ++i) {
                    xh[i] = (p[i] - mean_[ci]) * inv_std_[ci];
                    yo[i] = gamma_.value[ci] * xh[i] + beta_.value[ci];
                }
            }
        }
        return y;
    }

    Tensor backward(const Tensor& dy) override {
        const std::size_t b = x_.dim(0), c = x_.dim(1), hw = x_.dim(2) * x_.dim(3);
        const auto n = static_cast<double>(b * hw);
        Tensor dx(x_.shape);
        for (std::size_t ci = 0; ci < c; ++ci) {
            double sum_dy = 0.0, sum_dy_xhat = 0.0;
            for (std::size_t bi = 0; bi < b; ++bi) {
                const double* dyp = &dy.data[(bi * c + ci) * hw];
                const double* xh = &xhat_.data[(bi * c + ci) * hw];
                for (std::size_t i = 0; i < hw; ++i) {
                    sum_dy += dyp[i];
                    sum_dy_xhat += dyp[i] * xh[i];
                }
            }
            beta_.grad[ci] += sum_dy;
            gamma_.grad[ci] += sum_dy_xhat;
            const double g = gamma_.value[ci];
            for (std::size_t bi = 0; bi < b; ++bi) {
                const double* dyp = &dy.data[(bi * c + ci) * hw];
                const double* xh = &xhat_.data[(bi * c + ci) * hw];
                double* dxp = &dx.data[(bi * c + ci) * hw];
                for (std::size_t i = 0; i < hw; ++i) {
                    if (training_) {
                        dxp[i] = g * inv_std_[ci] / n * (n * dyp[i] - sum_dy - xh[i] * sum_dy_xhat);
                    } else {
                        dxp[i] = g * inv_std_[ci] * dyp[i];
                    }
                }
            }
        }
        return dx;
    }

    std::vector<ParamBlock*> param_blocks() override {
        return {&gamma_, &beta_, &running_mean_, &running_var_};
    }
    LayerKind kind() const override { return LayerKind::BatchNorm; }

private:
    ParamBlock gamma_, beta_, running_mean_, running_var_;
    double momentum_ = 0.1, eps_ = 1e-5;
    Tensor x_, xhat_;
    std::vector<double> mean_, var_, inv_std_;
    bool training_ = false;
};

class GlobalAvgPoolLayer final : public Layer {
public:
    Tensor forward(const Tensor& x, bool) override {
        if (x.ndim() != 4) throw std::invalid_argument("global_avg_pool: expected 4-D input");
        in_shape_ = x.shape;
        const std::size_t b = x.dim(0), c = x.dim(1), hw = x.dim(2) * x.dim(3);
        Tensor y({b, c});
        for (std::size_t bi = 0; bi < b; ++bi) {
            for (std::size_t ci = 0; ci < c; ++ci) {
                const double* p = &x.data[(bi * c + ci) * hw];
                double acc = 0.0;
                for (std::size_t i = 0; i < hw; ++i) acc += p[i];
                y.at2(bi, ci) = acc / static_cast<double>(hw);
            }
        }
        return y;
    }
    Tensor backward(const Tensor& dy) override {
        Tensor dx(in_shape_);
        const std::size_t b = in_shape_[0], c = in_shape_[1], hw = in_shape_[2] * in_shape_[3];
        for (std::size_t bi = 0; bi < b; ++bi) {
            for (std::size_t ci = 0; ci < c; ++ci) {
                const double g = dy.at2(bi, ci) / static_cast<double>(hw);
                double* p = &dx.data[(bi * c + ci) * hw];
                for (std::size_t i = 0; i < hw; ++i) p[i] = g;
            }
        }
        return dx;
    }
    LayerKind kind() const override { return LayerKind::GlobalAvgPool; }

private:
    std::vector<std::size_t> in_shape_;
};

/// Stacked-LSTM building block. Separate input, recurrent and bias blocks
/// per gate (i, f, g, o) so each of the 8 weight matrices is independently
/// visible to the optimizer and the gradient check.
class LstmLayer final : public Layer {
public:
    LstmLayer(std::size_t input_dim, std::size_t units, bool return_sequences, std::mt19937_64& rng)
        : units_(units), input_dim_(input_dim), return_sequences_(return_sequences) {
        static constexpr const char* gate_names[4] = {"i", "f", "g", "o"};
        w_.reserve(4);
        u_.reserve(4);
        b_.reserve(4);
        for (int g = 0; g < 4; ++g) {
            w_.emplace_back(std::string("w_") + gate_names[g], std::vector<std::size_t>{input_dim, units});
            u_.emplace_back(std::string("u_") + gate_names[g], std::vector<std::size_t>{units, units});
            b_.emplace_back(std::string("b_") + gate_names[g], std::vector<std::size_t>{units});
            init::uniform_fan_in(w_.back().value, input_dim, rng);
            init::uniform_fan_in(u_.back().value, units, rng);
        }
    }

    Tensor forward(const Tensor& x, bool) override {
        if (x.ndim() != 3 || x.dim(2) != input_dim_) {
            throw std::invalid_argument("lstm: input shape " + x.shape_string() + " does not match weights");
        }
        x_ = x;
        const std::size_t batch = x.dim(0), steps = x.dim(1);
        h_.assign(steps + 1, Tensor({batch, units_}));
        c_.assign(steps + 1, Tensor({batch, units_}));
        for (int g = 0; g < 4; ++g) gates_[g].assign(steps, Tensor({batch, units_}));
        tanh_c_.assign(steps, Tensor({batch, units_}));

        for (std::size_t t = 0; t < steps; ++t) {
            for (int g = 0; g < 4; ++g) {
                Tensor& z = gates_[g][t];
                for (std::size_t bi = 0; bi < batch; ++bi) {
                    for (std::size_t uidx = 0; uidx < units_; ++uidx) z.at2(bi, uidx) = b_[g].value[uidx];
                    const double* xt = &x.data[(bi * steps + t) * input_dim_];
                    for (std::size_t k = 0; k < input_dim_; ++k) {
                        const double xv = xt[k];
                        if (xv == 0.0) continue;
                        const double* wrow = &w_[g].value.data[k * units_];
                        double* zrow = &z.data[bi * units_];
                        for (std::size_t uidx = 0; uidx < units_; ++uidx) zrow[uidx] += xv * wrow[uidx];
                    }
                    const double* hp = &h_[t].data[bi * units_];
                    for (std::size_t k = 0; k < units_; ++k) {
                        const double hv = hp[k];
                        if (hv == 0.0) continue;
                        const double* urow = &u_[g].value.data[k * units_];
                        double* zrow = &z.data[bi * units_];
                        for (std::size_t uidx = 0; uidx < units_; ++uidx) zrow[uidx] += hv * urow[uidx];
                    }
                }
            }
            for (std::size_t i = 0; i < batch * units_; ++i) {
                const double ig = sigmoid(gates_[0][t].data[i]);
                const double fg = sigmoid(gates_[1][t].data[i]);
                const double gg = std::tanh(gates_[2][t].data[i]);
                const double og = sigmoid(gates_[3][t].data[i]);
                gates_[0][t].data[i] = ig;
                gates_[1][t].data[i] = fg;
                gates_[2][t].data[i] = gg;
                gates_[3][t].data[i] = og;
                const double ct = fg * c_[t].data[i] + ig * gg;
                c_[t + 1].data[i] = ct;
                tanh_c_[t].data[i] = std::tanh(ct);
                h_[t + 1].data[i] = og * tanh_c_[t].data[i];
            }
        }

        if (return_sequences_) {
            Tensor y({batch, steps, units_});
            for (std::size_t t = 0; t < steps; ++t) {
                for (std::size_t bi = 0; bi < batch; ++bi) {
                    for (std::size_t uidx = 0; uidx < units_; ++uidx) {
                        y.at3(bi, t, uidx) = h_[t + 1].at2(bi, uidx);
                    }
                }
            }
            return y;
        }
        return h_.back();
    }

    Tensor backward(const Tensor& dy) override {
        const std::size_t batch = x_.dim(0), steps = x_.dim(1);
        Tensor dx(x_.shape);
        Tensor dh({batch, units_});
        Tensor dc({batch, units_});

        for (std::size_t t = steps; t-- > 0;) {
            if (return_sequences_) {
                for (std::size_t bi = 0; bi < batch; ++bi) {
                    for (std::size_t uidx = 0; uidx < units_; ++uidx) dh.at2(bi, uidx) += dy.at3(bi, t, uidx);
                }
            } else if (t == steps - 1) {
                for (std::size_t i = 0; i < batch * units_; ++i) dh.data[i] += dy.data[i];
            }

            Tensor dpre[4];
            for (auto& g : dpre) g = Tensor({batch, units_});
            for (std::size_t i = 0; i < batch * units_; ++i) {
                const double ig = gates_[0][t].data[i];
                const double fg = gates_[1][t].data[i];
                const double gg = gates_[2][t].data[i];
                const double og = gates_[3][t].data[i];
                const double tc = tanh_c_[t].data[i];
                const double dht = dh.data[i];
                const double dct = dht * og * (1.0 - tc * tc) + dc.data[i];
                dpre[0].data[i] = dct * gg * ig * (1.0 - ig);
                dpre[1].data[i] = dct * c_[t].data[i] * fg * (1.0 - fg);
                dpre[2].data[i] = dct * ig * (1.0 - gg * gg);
                dpre[3].data[i] = dht * tc * og * (1.0 - og);
                dc.data[i] = dct * fg;
            }

            Tensor dh_next({batch, units_});
            for (int g = 0; g < 4; ++g) {
                for (std::size_t bi = 0; bi < batch; ++bi) {
                    const double* dp = &dpre[g].data[bi * units_];
                    const double* xt = &x_.data[(bi * steps + t) * input_dim_];
                    double* dxt = &dx.data[(bi * steps + t) * input_dim_];
                    const double* hp = &h_[t].data[bi * units_];

                    for (std::size_t uidx = 0; uidx < units_; ++uidx) b_[g].grad[uidx] += dp[uidx];
                    for (std::size_t k = 0; k < input_dim_; ++k) {
                        double* wg = &w_[g].grad.data[k * units_];
                        const double* wv = &w_[g].value.data[k * units_];
                        const double xv = xt[k];
                        double acc = 0.0;
                        for (std::size_t uidx = 0; uidx < units_; ++uidx) {
                            wg[uidx] += xv * dp[uidx];
                            acc += wv[uidx] * dp[uidx];
                        }
                        dxt[k] += acc;
                    }
                    for (std::size_t k = 0; k < units_; ++k) {
                        double* ug = &u_[g].grad.data[k * units_];
                        const double* uv = &u_[g].value.data[k * units_];
                        const double hv = hp[k];
                        double acc = 0.0;
                        for (std::size_t uidx = 0; uidx < units_; ++uidx) {
                            ug[uidx] += hv * dp[uidx];
                            acc += uv[uidx] * dp[uidx];
                        }
                        dh_next.at2(bi, k) += acc;
                    }
                }
            }
            dh = std::move(dh_next);
        }
        return dx;
    }

    std::vector<ParamBlock*> param_blocks() override {
        std::vector<ParamBlock*> out;
        for (auto& p : w_) out.push_back(&p);
        for (auto& p : u_) out.push_back(&p);
        for (auto& p : b_) out.push_back(&p);
        return out;
    }
    LayerKind kind() const override { return LayerKind::Lstm; }

private:
    static double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

    std::size_t units_, input_dim_;
    bool return_sequences_;
    std::vector<ParamBlock> w_, u_, b_;
    Tensor x_;
    std::vector<Tensor> h_, c_, tanh_c_;
    std::vector<Tensor> gates_[4];
};

/// Two 3x3 convolutions with batchnorm; identity shortcut, or a 1x1
/// projection (with batchnorm) whenever channels or stride change.
class ResidualBlockLayer final : public Layer {
public:
    ResidualBlockLayer(std::size_t in_channels, int out_channels, int stride, std::mt19937_64& rng)
        : conv1_(in_channels, out_channels, 3, stride, true, rng),
          bn1_(static_cast<std::size_t>(out_channels)),
          conv2_(static_cast<std::size_t>(out_channels), out_channels, 3, 1, true, rng),
          bn2_(static_cast<std::size_t>(out_channels)),
          project_(in_channels != static_cast<std::size_t>(out_channels) || stride != 1) {
        if (project_) {
            proj_conv_ = std::make_unique<Conv2dLayer>(in_channels, out_channels, 1, stride, true, rng);
            proj_bn_ = std::make_unique<BatchNormLayer>(static_cast<std::size_t>(out_channels));
        }
    }

    Tensor forward(const Tensor& x, bool training) override {
        Tensor main = bn1_.forward(conv1_.forward(x, training), training);
        main = relu1_.forward(main, training);
        main = bn2_.forward(conv2_.forward(main, training), training);
        Tensor shortcut = project_ ? proj_bn_->forward(proj_conv_->forward(x, training), training) : x;
        if (!same_shape(main, shortcut)) {
            throw std::invalid_argument("residual_block: branch shapes diverge");
        }
        Tensor sum = main;
        for (std::size_t i = 0; i < sum.size(); ++i) sum.data[i] += shortcut.data[i];
        return relu_out_.forward(sum, training);
    }

    Tensor backward(const Tensor& dy) override {
        Tensor dsum = relu_out_.backward(dy);
        Tensor dmain = conv1_.backward(bn1_.backward(relu1_.backward(conv2_.backward(bn2_.backward(dsum)))));
        Tensor dshort = project_ ? proj_conv_->backward(proj_bn_->backward(dsum)) : dsum;
        Tensor dx = dmain;
        for (std::size_t i = 0; i < dx.size(); ++i) dx.data[i] += dshort.data[i];
        return dx;
    }

    std::vector<ParamBlock*> param_blocks() override {
        std::vector<ParamBlock*> out;
        auto add = [&out](std::vector<ParamBlock*> blocks) {
            out.insert(out.end(), blocks.begin(), blocks.end());
        };
        add(conv1_.param_blocks());
        add(bn1_.param_blocks());
        add(conv2_.param_blocks());
        add(bn2_.param_blocks());
        if (project_) {
            add(proj_conv_->param_blocks());
            add(proj_bn_->param_blocks());
        }
        return out;
    }
    LayerKind kind() const override { return LayerKind::ResidualBlock; }

private:
    Conv2dLayer conv1_;
    BatchNormLayer bn1_;
    Conv2dLayer conv2_;
    BatchNormLayer bn2_;
    ReluLayer relu1_, relu_out_;
    bool project_;
    std::unique_ptr<Conv2dLayer> proj_conv_;
    std::unique_ptr<BatchNormLayer> proj_bn_;
};

}  // namespace coughpipe::nn
