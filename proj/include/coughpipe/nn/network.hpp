#pragma once

#include <cmath>
#include <cstdint>
#include <memory>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "coughpipe/nn/layers.hpp"
#include "coughpipe/nn/tensor.hpp"

namespace coughpipe::nn {

/// Ordered layer list plus the per-example input shape: {channels, H, W}
/// for image networks, {T, D} for sequence networks.
struct NetworkSpec {
    std::vector<LayerSpec> layers;
    std::vector<std::size_t> input_shape;
    int classes = 2;
};

/// Per-example output shape of one layer, used for build-time validation
/// and parameter sizing.
inline std::vector<std::size_t> infer_output_shape(const LayerSpec& spec, const std::vector<std::size_t>& in,
                                                   std::size_t layer_index) {
    auto fail = [&](const std::string& why) {
        throw std::invalid_argument("layer " + std::to_string(layer_index) + " (" + layer_kind_name(spec.kind) +
                                    "): " + why);
    };
    switch (spec.kind) {
        case LayerKind::Conv2d: {
            if (in.size() != 3) fail("expected (C,H,W) input");
            const auto g = conv_geometry(in[1], in[2], spec.kernel, spec.stride, spec.same_padding);
            if (g.out_h < 1 || g.out_w < 1) fail("input too small");
            return {static_cast<std::size_t>(spec.filters), g.out_h, g.out_w};
        }
        case LayerKind::MaxPool2x2: {
            if (in.size() != 3) fail("expected (C,H,W) input");
            if (in[1] < 2 || in[2] < 2) fail("input too small for pooling");
            return {in[0], in[1] / 2, in[2] / 2};
        }
        case LayerKind::Dense:
            if (in.size() != 1) fail("expected flat input");
            return {static_cast<std::size_t>(spec.units)};
        case LayerKind::Relu:
        case LayerKind::Dropout:
            return in;
        case LayerKind::Softmax:
            if (in.size() != 1) fail("expected flat input");
            return in;
        case LayerKind::Flatten:
            return {Tensor::count(in)};
        case LayerKind::Lstm:
            if (in.size() != 2) fail("expected (T,D) input");
            if (spec.return_sequences) return {in[0], static_cast<std::size_t>(spec.units)};
            return {static_cast<std::size_t>(spec.units)};
        case LayerKind::ResidualBlock: {
            if (in.size() != 3) fail("expected (C,H,W) input");
            const auto g = conv_geometry(in[1], in[2], 3, spec.stride, true);
            return {static_cast<std::size_t>(spec.channels), g.out_h, g.out_w};
        }
        case LayerKind::BatchNorm:
            if (in.size() != 3) fail("expected (C,H,W) input");
            return in;
        case LayerKind::GlobalAvgPool:
            if (in.size() != 3) fail("expected (C,H,W) input");
            return {in[0]};
    }
    fail("unknown layer kind");
    return {};
}

/// A built network: spec, parameters and the scratch state needed for
/// forward/backward. One instance is owned by one training run at a time;
/// parameter snapshots are plain vectors, safe to share.
class Network {
public:
    Network(NetworkSpec spec, std::uint64_t seed) : spec_(std::move(spec)), rng_(seed), seed_(seed) {
        std::vector<std::size_t> shape = spec_.input_shape;
        for (std::size_t li = 0; li < spec_.layers.size(); ++li) {
            const LayerSpec& ls = spec_.layers[li];
            const auto out_shape = infer_output_shape(ls, shape, li);
            layers_.push_back(make_layer(ls, shape));
            shape = out_shape;
        }
        if (spec_.layers.empty() || spec_.layers.back().kind != LayerKind::Softmax) {
            throw std::invalid_argument("network: final layer must be softmax");
        }
        if (shape != std::vector<std::size_t>{static_cast<std::size_t>(spec_.classes)}) {
            throw std::invalid_argument("network: output width does not match class count");
        }
        for (std::size_t li = 0; li < layers_.size(); ++li) {
            for (ParamBlock* b : layers_[li]->param_blocks()) {
                blocks_.push_back(b);
                block_names_.push_back("layer" + std::to_string(li) + "." + b->name);
            }
        }
    }

    const NetworkSpec& spec() const { return spec_; }
    std::uint64_t seed() const { return seed_; }

    Tensor forward(const Tensor& batch, bool training) {
        check_batch_shape(batch);
        Tensor cur = batch;
        for (std::size_t li = 0; li < layers_.size(); ++li) {
            try {
                cur = layers_[li]->forward(cur, training);
            } catch (const std::invalid_argument& ex) {
                throw std::invalid_argument("layer " + std::to_string(li) + ": " + ex.what());
            }
        }
        probs_ = cur;
        return cur;
    }

    /// Mean cross-entropy of the most recent forward pass.
    double loss(const std::vector<int>& labels) const {
        const std::size_t batch = probs_.dim(0);
        if (labels.size() != batch) throw std::invalid_argument("loss: label count does not match batch");
        double acc = 0.0;
        for (std::size_t i = 0; i < batch; ++i) {
            acc -= std::log(std::max(probs_.at2(i, static_cast<std::size_t>(labels[i])), 1e-300));
        }
        return acc / static_cast<double>(batch);
    }

    /// Backpropagates mean cross-entropy through the softmax head; the
    /// gradient injected at the logits is (p - y)/batch. Gradients
    /// accumulate into the parameter blocks; returns the input gradient.
    Tensor backward(const std::vector<int>& labels) {
        const std::size_t batch = probs_.dim(0), classes = probs_.dim(1);
        Tensor dlogits({batch, classes});
        for (std::size_t i = 0; i < batch; ++i) {
            for (std::size_t j = 0; j < classes; ++j) {
                const double y = labels[i] == static_cast<int>(j) ? 1.0 : 0.0;
                dlogits.at2(i, j) = (probs_.at2(i, j) - y) / static_cast<double>(batch);
            }
        }
        Tensor cur = dlogits;
        for (std::size_t li = layers_.size() - 1; li-- > 0;) {
            cur = layers_[li]->backward(cur);
        }
        return cur;
    }

    void zero_grads() {
        for (ParamBlock* b : blocks_) std::fill(b->grad.data.begin(), b->grad.data.end(), 0.0);
    }

    const std::vector<ParamBlock*>& param_blocks() const { return blocks_; }
    const std::vector<std::string>& block_names() const { return block_names_; }

    std::size_t parameter_count() const {
        std::size_t n = 0;
        for (const ParamBlock* b : blocks_) n += b->value.size();
        return n;
    }

    std::vector<std::vector<double>> snapshot_parameters() const {
        std::vector<std::vector<double>> out;
        out.reserve(blocks_.size());
        for (const ParamBlock* b : blocks_) out.push_back(b->value.data);
        return out;
    }

    void restore_parameters(const std::vector<std::vector<double>>& snap) {
        if (snap.size() != blocks_.size()) throw std::invalid_argument("restore: block count mismatch");
        for (std::size_t i = 0; i < snap.size(); ++i) {
            if (snap[i].size() != blocks_[i]->value.size()) {
                throw std::invalid_argument("restore: block size mismatch at " + block_names_[i]);
            }
            blocks_[i]->value.data = snap[i];
        }
    }

    void set_dropout_enabled(bool enabled) {
        for (auto& l : layers_) {
            if (auto* d = dynamic_cast<DropoutLayer*>(l.get())) d->set_enabled(enabled);
        }
    }

private:
    std::unique_ptr<Layer> make_layer(const LayerSpec& ls, const std::vector<std::size_t>& in) {
        switch (ls.kind) {
            case LayerKind::Conv2d:
                return std::make_unique<Conv2dLayer>(in[0], ls.filters, ls.kernel, ls.stride, ls.same_padding, rng_);
            case LayerKind::MaxPool2x2:
                return std::make_unique<MaxPoolLayer>();
            case LayerKind::Dense:
                return std::make_unique<DenseLayer>(in[0], static_cast<std::size_t>(ls.units), rng_);
            case LayerKind::Relu:
                return std::make_unique<ReluLayer>();
            case LayerKind::Softmax:
                return std::make_unique<SoftmaxLayer>();
            case LayerKind::Dropout:
                return std::make_unique<DropoutLayer>(ls.rate, rng_);
            case LayerKind::Flatten:
                return std::make_unique<FlattenLayer>();
            case LayerKind::Lstm:
                return std::make_unique<LstmLayer>(in[1], static_cast<std::size_t>(ls.units), ls.return_sequences,
                                                   rng_);
            case LayerKind::ResidualBlock:
                return std::make_unique<ResidualBlockLayer>(in[0], ls.channels, ls.stride, rng_);
            case LayerKind::BatchNorm:
                return std::make_unique<BatchNormLayer>(in[0]);
            case LayerKind::GlobalAvgPool:
                return std::make_unique<GlobalAvgPoolLayer>();
        }
        throw std::invalid_argument("unknown layer kind");
    }

    void check_batch_shape(const Tensor& batch) const {
        bool ok = batch.ndim() == spec_.input_shape.size() + 1;
        if (ok) {
            for (std::size_t i = 0; i < spec_.input_shape.size(); ++i) {
                ok = ok && batch.dim(i + 1) == spec_.input_shape[i];
            }
        }
        if (!ok) {
            throw std::invalid_argument("network: batch shape " + batch.shape_string() +
                                        " does not match input shape");
        }
    }

    NetworkSpec spec_;
    std::vector<std::unique_ptr<Layer>> layers_;
    std::vector<ParamBlock*> blocks_;
    std::vector<std::string> block_names_;
    std::mt19937_64 rng_;
    std::uint64_t seed_;
    Tensor probs_;
};

// --- spec JSON ---------------------------------------------------------------

inline nlohmann::json layer_spec_to_json(const LayerSpec& s) {
    nlohmann::json j{{"kind", layer_kind_name(s.kind)}};
    switch (s.kind) {
        case LayerKind::Conv2d:
            j["filters"] = s.filters;
            j["kernel"] = s.kernel;
            j["stride"] = s.stride;
            j["padding"] = s.same_padding ? "same" : "valid";
            break;
        case LayerKind::Dense:
            j["units"] = s.units;
            break;
        case LayerKind::Dropout:
            j["rate"] = s.rate;
            break;
        case LayerKind::Lstm:
            j["units"] = s.units;
            j["return_sequences"] = s.return_sequences;
            break;
        case LayerKind::ResidualBlock:
            j["channels"] = s.channels;
            j["stride"] = s.stride;
            break;
        default:
            break;
    }
    return j;
}

inline LayerSpec layer_spec_from_json(const nlohmann::json& j) {
    const std::string kind = j.at("kind").get<std::string>();
    if (kind == "conv2d") {
        return LayerSpec::conv2d(j.at("filters").get<int>(), j.at("kernel").get<int>(), j.at("stride").get<int>(),
                                 j.at("padding").get<std::string>() == "same");
    }
    if (kind == "maxpool2x2") return LayerSpec::maxpool();
    if (kind == "dense") return LayerSpec::dense(j.at("units").get<int>());
    if (kind == "relu") return LayerSpec::relu();
    if (kind == "softmax") return LayerSpec::softmax();
    if (kind == "dropout") return LayerSpec::dropout(j.at("rate").get<double>());
    if (kind == "flatten") return LayerSpec::flatten();
    if (kind == "lstm") return LayerSpec::lstm(j.at("units").get<int>(), j.at("return_sequences").get<bool>());
    if (kind == "residual_block") {
        return LayerSpec::residual_block(j.at("channels").get<int>(), j.at("stride").get<int>());
    }
    if (kind == "batchnorm") return LayerSpec::batchnorm();
    if (kind == "global_avg_pool") return LayerSpec::global_avg_pool();
    throw std::invalid_argument("unknown layer kind '" + kind + "'");
}

inline nlohmann::json network_spec_to_json(const NetworkSpec& s) {
    nlohmann::json layers = nlohmann::json::array();
    for (const auto& l : s.layers) layers.push_back(layer_spec_to_json(l));
    return {{"layers", layers}, {"input_shape", s.input_shape}, {"classes", s.classes}};
}

inline NetworkSpec network_spec_from_json(const nlohmann::json& j) {
    NetworkSpec s;
    for (const auto& l : j.at("layers")) s.layers.push_back(layer_spec_from_json(l));
    s.input_shape = j.at("input_shape").get<std::vector<std::size_t>>();
    s.classes = j.at("classes").get<int>();
    return s;
}

}  // namespace coughpipe::nn
