#pragma once

#include <stdexcept>
#include <vector>

#include "coughpipe/models/configs.hpp"
#include "coughpipe/nn/network.hpp"

namespace coughpipe::models {

enum class Architecture { Cnn, Lstm, ResnetMini };

inline const char* architecture_name(Architecture a) {
    switch (a) {
        case Architecture::Cnn: return "cnn";
        case Architecture::Lstm: return "lstm";
        case Architecture::ResnetMini: return "resnet_mini";
    }
    return "?";
}

inline Architecture parse_architecture(const std::string& s) {
    if (s == "cnn") return Architecture::Cnn;
    if (s == "lstm") return Architecture::Lstm;
    if (s == "resnet_mini") return Architecture::ResnetMini;
    throw std::invalid_argument("unknown architecture '" + s + "'");
}

/// Image input shape for a (rows x cols) feature matrix.
inline std::vector<std::size_t> image_input(std::size_t rows, std::size_t cols) { return {1, rows, cols}; }
/// Sequence input shape: frames as timesteps, feature rows as dimensions.
inline std::vector<std::size_t> sequence_input(std::size_t rows, std::size_t cols) { return {cols, rows}; }

/// Grid-search CNN: one convolution block and a small dense head.
inline nn::NetworkSpec build_cnn(const ClassifierConfig& cfg, const std::vector<std::size_t>& input_shape,
                                 int classes) {
    if (classes != 2 && classes != 3) throw std::invalid_argument("build_cnn: classes must be 2 or 3");
    nn::NetworkSpec spec;
    spec.input_shape = input_shape;
    spec.classes = classes;
    spec.layers = {
        nn::LayerSpec::conv2d(cfg.conv_filters, cfg.kernel_size),
        nn::LayerSpec::relu(),
        nn::LayerSpec::maxpool(),
        nn::LayerSpec::flatten(),
        nn::LayerSpec::dropout(cfg.dropout_rate),
        nn::LayerSpec::dense(cfg.dense_units),
        nn::LayerSpec::relu(),
        nn::LayerSpec::dense(classes),
        nn::LayerSpec::softmax(),
    };
    return spec;
}

/// Pre-training CNN: three convolutions (256, 128, 64) with 2x2 kernels and
/// 2x2 max-pooling, then dense 512 and 128 relu layers (dropout 0.3 between
/// them) and a 3-way softmax.
inline nn::NetworkSpec build_cnn_pretrain(const std::vector<std::size_t>& input_shape) {
    nn::NetworkSpec spec;
    spec.input_shape = input_shape;
    spec.classes = 3;
    spec.layers = {
        nn::LayerSpec::conv2d(256, 2), nn::LayerSpec::relu(), nn::LayerSpec::maxpool(),
        nn::LayerSpec::conv2d(128, 2), nn::LayerSpec::relu(), nn::LayerSpec::maxpool(),
        nn::LayerSpec::conv2d(64, 2),  nn::LayerSpec::relu(), nn::LayerSpec::maxpool(),
        nn::LayerSpec::flatten(),
        nn::LayerSpec::dense(512), nn::LayerSpec::relu(),
        nn::LayerSpec::dropout(0.3),
        nn::LayerSpec::dense(128), nn::LayerSpec::relu(),
        nn::LayerSpec::dense(3), nn::LayerSpec::softmax(),
    };
    return spec;
}

/// Grid-search LSTM: one recurrent layer consuming the S frames as a
/// sequence of (3M+2)-dim vectors, then a small dense head.
inline nn::NetworkSpec build_lstm(const ClassifierConfig& cfg, const std::vector<std::size_t>& input_shape,
                                  int classes) {
    if (classes != 2 && classes != 3) throw std::invalid_argument("build_lstm: classes must be 2 or 3");
    nn::NetworkSpec spec;
    spec.input_shape = input_shape;
    spec.classes = classes;
    spec.layers = {
        nn::LayerSpec::lstm(cfg.lstm_units, false),
        nn::LayerSpec::dropout(cfg.dropout_rate),
        nn::LayerSpec::dense(cfg.dense_units),
        nn::LayerSpec::relu(),
        nn::LayerSpec::dense(classes),
        nn::LayerSpec::softmax(),
    };
    return spec;
}

/// Pre-training LSTM: stacked 512/256/128 recurrent layers and the same
/// 512-128-3 dense head as the pre-training CNN.
inline nn::NetworkSpec build_lstm_pretrain(const std::vector<std::size_t>& input_shape) {
    nn::NetworkSpec spec;
    spec.input_shape = input_shape;
    spec.classes = 3;
    spec.layers = {
        nn::LayerSpec::lstm(512, true),
        nn::LayerSpec::lstm(256, true),
        nn::LayerSpec::lstm(128, false),
        nn::LayerSpec::dense(512), nn::LayerSpec::relu(),
        nn::LayerSpec::dropout(0.3),
        nn::LayerSpec::dense(128), nn::LayerSpec::relu(),
        nn::LayerSpec::dense(3), nn::LayerSpec::softmax(),
    };
    return spec;
}

/// Miniature residual network: stem convolution, `depth_blocks` residual
/// blocks with channel doubling (stride 2 after the first), global average
/// pooling and a 512-unit dense layer before the classifier.
inline nn::NetworkSpec build_resnet_mini(int depth_blocks, int stem_channels,
                                         const std::vector<std::size_t>& input_shape, int classes) {
    if (depth_blocks < 1) throw std::invalid_argument("build_resnet_mini: depth_blocks must be >= 1");
    if (classes != 2 && classes != 3) throw std::invalid_argument("build_resnet_mini: classes must be 2 or 3");
    nn::NetworkSpec spec;
    spec.input_shape = input_shape;
    spec.classes = classes;
    spec.layers = {
        nn::LayerSpec::conv2d(stem_channels, 3, 1, true),
        nn::LayerSpec::relu(),
        nn::LayerSpec::maxpool(),
    };
    int channels = stem_channels;
    for (int bi = 0; bi < depth_blocks; ++bi) {
        if (bi > 0) channels *= 2;
        spec.layers.push_back(nn::LayerSpec::residual_block(channels, bi > 0 ? 2 : 1));
    }
    spec.layers.push_back(nn::LayerSpec::global_avg_pool());
    spec.layers.push_back(nn::LayerSpec::dense(512));
    spec.layers.push_back(nn::LayerSpec::relu());
    spec.layers.push_back(nn::LayerSpec::dense(classes));
    spec.layers.push_back(nn::LayerSpec::softmax());
    return spec;
}

/// Pre-training variant of the miniature residual network with the shared
/// 512-128-3 head.
inline nn::NetworkSpec build_resnet_mini_pretrain(int depth_blocks, int stem_channels,
                                                  const std::vector<std::size_t>& input_shape) {
    nn::NetworkSpec spec = build_resnet_mini(depth_blocks, stem_channels, input_shape, 3);
    // swap the (512, classes) head for the pre-training (512, 128, 3) head
    while (!spec.layers.empty() && spec.layers.back().kind != nn::LayerKind::GlobalAvgPool) spec.layers.pop_back();
    spec.layers.push_back(nn::LayerSpec::dense(512));
    spec.layers.push_back(nn::LayerSpec::relu());
    spec.layers.push_back(nn::LayerSpec::dropout(0.3));
    spec.layers.push_back(nn::LayerSpec::dense(128));
    spec.layers.push_back(nn::LayerSpec::relu());
    spec.layers.push_back(nn::LayerSpec::dense(3));
    spec.layers.push_back(nn::LayerSpec::softmax());
    return spec;
}

}  // namespace coughpipe::models
