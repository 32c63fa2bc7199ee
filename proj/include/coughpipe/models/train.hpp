#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "coughpipe/common.hpp"
#include "coughpipe/eval/metrics.hpp"
#include "coughpipe/features/feature_matrix.hpp"
#include "coughpipe/models/build.hpp"
#include "coughpipe/models/configs.hpp"
#include "coughpipe/nn/adam.hpp"
#include "coughpipe/nn/checkpoint.hpp"

namespace coughpipe::models {

struct EpochRecord {
    int epoch = 0;
    double train_loss = 0.0;
    double val_f1 = 0.0;
};

struct TrainResult {
    nn::Checkpoint checkpoint;
    std::vector<EpochRecord> history;
    int best_epoch = 0;
    double best_val_f1 = 0.0;
};

/// One training example: a feature matrix plus its class index under the
/// task at hand.
struct TrainExample {
    const features::FeatureMatrix* features = nullptr;
    int class_index = 0;
};

namespace detail {

/// Packs feature matrices into a batch tensor. Image networks take
/// (B, 1, rows, cols); sequence networks take (B, S, 3M+2), i.e. the
/// transposed matrix so frames run along time.
inline nn::Tensor make_batch(const std::vector<TrainExample>& examples, const std::vector<std::size_t>& indices,
                             const std::vector<std::size_t>& input_shape) {
    const bool image = input_shape.size() == 3;
    std::vector<std::size_t> shape{indices.size()};
    shape.insert(shape.end(), input_shape.begin(), input_shape.end());
    nn::Tensor batch(shape);
    for (std::size_t bi = 0; bi < indices.size(); ++bi) {
        const features::FeatureMatrix& fm = *examples[indices[bi]].features;
        if (image) {
            if (input_shape[1] != fm.rows || input_shape[2] != fm.cols) {
                throw std::invalid_argument("batch: feature shape does not match network input");
            }
            std::copy(fm.values.begin(), fm.values.end(),
                      batch.data.begin() + static_cast<std::ptrdiff_t>(bi * fm.rows * fm.cols));
        } else {
            if (input_shape[0] != fm.cols || input_shape[1] != fm.rows) {
                throw std::invalid_argument("batch: feature shape does not match network input");
            }
            for (std::size_t t = 0; t < fm.cols; ++t) {
                for (std::size_t r = 0; r < fm.rows; ++r) {
                    batch.data[(bi * fm.cols + t) * fm.rows + r] = fm.at(r, t);
                }
            }
        }
    }
    return batch;
}

inline std::vector<int> gather_labels(const std::vector<TrainExample>& examples,
                                      const std::vector<std::size_t>& indices) {
    std::vector<int> labels;
    labels.reserve(indices.size());
    for (std::size_t i : indices) labels.push_back(examples[i].class_index);
    return labels;
}

}  // namespace detail

/// Event-level predictions for a set of examples (one network evaluation
/// per event), batched for throughput.
inline std::vector<std::vector<double>> predict_probs(nn::Network& net, const std::vector<TrainExample>& examples,
                                                      const std::vector<std::size_t>& indices,
                                                      std::size_t batch_size = 64) {
    std::vector<std::vector<double>> probs(indices.size());
    for (std::size_t start = 0; start < indices.size(); start += batch_size) {
        const std::size_t end = std::min(indices.size(), start + batch_size);
        std::vector<std::size_t> chunk(indices.begin() + static_cast<std::ptrdiff_t>(start),
                                       indices.begin() + static_cast<std::ptrdiff_t>(end));
        const nn::Tensor out = net.forward(detail::make_batch(examples, chunk, net.spec().input_shape), false);
        for (std::size_t i = 0; i < chunk.size(); ++i) {
            std::vector<double> row(out.dim(1));
            for (std::size_t c = 0; c < row.size(); ++c) row[c] = out.at2(i, c);
            probs[start + i] = std::move(row);
        }
    }
    return probs;
}

inline double event_f1(nn::Network& net, const std::vector<TrainExample>& examples,
                       const std::vector<std::size_t>& indices, int class_count) {
    if (indices.empty()) return 0.0;
    const auto probs = predict_probs(net, examples, indices);
    std::vector<int> preds, truths;
    preds.reserve(indices.size());
    truths.reserve(indices.size());
    for (std::size_t i = 0; i < indices.size(); ++i) {
        preds.push_back(eval::classify_event(probs[i]));
        truths.push_back(examples[indices[i]].class_index);
    }
    const auto mode = class_count == 2 ? eval::F1Mode::PositiveClass : eval::F1Mode::Macro;
    return eval::f1_score(preds, truths, mode, class_count);
}

namespace detail {

/// Patient-disjoint validation split. Patients are grouped per class and a
/// seeded shuffle picks roughly `fraction` of each class's patients for
/// validation; SMOTE synthetics (patient_id "synthetic") always train.
inline void split_train_validation(const std::vector<TrainExample>& examples, double fraction, std::uint64_t seed,
                                   std::vector<std::size_t>& train_idx, std::vector<std::size_t>& val_idx) {
    std::map<int, std::vector<std::string>> patients_by_class;
    std::map<std::string, int> patient_class;
    for (const auto& e : examples) {
        const std::string& pid = e.features->patient_id;
        if (e.features->synthetic || pid == "synthetic") continue;
        if (!patient_class.count(pid)) {
            patient_class[pid] = e.class_index;
            patients_by_class[e.class_index].push_back(pid);
        }
    }
    std::set<std::string> val_patients;
    std::mt19937_64 rng(seed ^ 0x5eedf01du);
    for (auto& [cls, pids] : patients_by_class) {
        std::sort(pids.begin(), pids.end());
        std::shuffle(pids.begin(), pids.end(), rng);
        // keep at least one patient per class in training
        auto take = static_cast<std::size_t>(std::floor(fraction * static_cast<double>(pids.size())));
        if (fraction > 0.0 && take == 0 && pids.size() >= 2) take = 1;
        for (std::size_t i = 0; i < take; ++i) val_patients.insert(pids[i]);
    }
    train_idx.clear();
    val_idx.clear();
    for (std::size_t i = 0; i < examples.size(); ++i) {
        const auto& fm = *examples[i].features;
        if (!fm.synthetic && val_patients.count(fm.patient_id)) {
            val_idx.push_back(i);
        } else {
            train_idx.push_back(i);
        }
    }
}

}  // namespace detail

/// Builds a network from a spec (seeded) and trains it. Minibatches are
/// reshuffled every epoch; after each epoch the patient-disjoint validation
/// F1 (positive-class for 2 classes, macro otherwise) is recorded and
/// training stops once it has not improved for `patience` consecutive
/// epochs. The returned checkpoint holds the best epoch's parameters.
inline TrainResult train_network(nn::Network& net, const std::vector<TrainExample>& examples,
                                 const TrainConfig& cfg) {
    cfg.validate();
    if (examples.empty()) throw std::invalid_argument("train: no examples");
    const int class_count = net.spec().classes;

    std::vector<std::size_t> train_idx, val_idx;
    detail::split_train_validation(examples, cfg.validation_fraction, cfg.seed, train_idx, val_idx);
    if (train_idx.empty()) throw std::invalid_argument("train: empty training split");
    // degenerate datasets (a single patient) fall back to training F1
    const std::vector<std::size_t>& f1_idx = val_idx.empty() ? train_idx : val_idx;

    nn::Adam optimizer(net);
    std::mt19937_64 shuffle_rng(cfg.seed ^ 0xba7c4e5u);

    TrainResult result;
    auto best_params = net.snapshot_parameters();
    double best_f1 = -1.0;
    int best_epoch = 0;

    for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
        std::vector<std::size_t> order = train_idx;
        std::shuffle(order.begin(), order.end(), shuffle_rng);

        double loss_sum = 0.0;
        std::size_t batches = 0;
        for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(cfg.batch_size)) {
            const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
            std::vector<std::size_t> chunk(order.begin() + static_cast<std::ptrdiff_t>(start),
                                           order.begin() + static_cast<std::ptrdiff_t>(end));
            const nn::Tensor batch = detail::make_batch(examples, chunk, net.spec().input_shape);
            const auto labels = detail::gather_labels(examples, chunk);

            net.zero_grads();
            net.forward(batch, true);
            const double loss = net.loss(labels);
            if (!std::isfinite(loss)) {
                throw std::runtime_error("train: non-finite loss at epoch " + std::to_string(epoch) + ", batch " +
                                         std::to_string(batches));
            }
            net.backward(labels);
            optimizer.step(net, cfg.learning_rate);
            loss_sum += loss;
            ++batches;
        }

        const double val_f1 = event_f1(net, examples, f1_idx, class_count);
        result.history.push_back({epoch, loss_sum / static_cast<double>(std::max<std::size_t>(1, batches)), val_f1});

        if (val_f1 > best_f1) {
            best_f1 = val_f1;
            best_epoch = epoch;
            best_params = net.snapshot_parameters();
        }
        if (epoch - best_epoch >= cfg.patience) break;
    }

    net.restore_parameters(best_params);
    result.best_epoch = best_epoch;
    result.best_val_f1 = std::max(0.0, best_f1);

    nlohmann::json history = nlohmann::json::array();
    for (const auto& h : result.history) {
        history.push_back({{"epoch", h.epoch}, {"loss", h.train_loss}, {"val_f1", h.val_f1}});
    }
    result.checkpoint = nn::make_checkpoint(
        net, {{"history", history}, {"best_epoch", best_epoch}, {"best_val_f1", result.best_val_f1}});
    return result;
}

/// Convenience overload: build the architecture from its spec, then train.
inline TrainResult train(const nn::NetworkSpec& spec, const std::vector<TrainExample>& examples,
                         const TrainConfig& cfg) {
    nn::Network net(spec, cfg.seed);
    return train_network(net, examples, cfg);
}

/// Pre-training on sneeze/speech/noise features; cough labels are refused
/// before any training happens.
inline TrainResult pretrain(Architecture arch, const std::vector<const features::FeatureMatrix*>& examples,
                            const TrainConfig& cfg, int resnet_depth = 2, int resnet_stem_channels = 8) {
    if (examples.empty()) throw std::invalid_argument("pretrain: no examples");
    for (const auto* fm : examples) {
        if (is_cough_label(fm->label)) {
            throw std::invalid_argument("pretrain: cough label '" + std::string(label_name(fm->label)) +
                                        "' in event '" + fm->event_id + "' (coughs are excluded from pre-training)");
        }
    }
    std::vector<TrainExample> train_examples;
    train_examples.reserve(examples.size());
    for (const auto* fm : examples) {
        train_examples.push_back({fm, task_class_index(Task::Pretrain, fm->label)});
    }
    const std::size_t rows = examples.front()->rows, cols = examples.front()->cols;
    nn::NetworkSpec spec;
    switch (arch) {
        case Architecture::Cnn: spec = build_cnn_pretrain(image_input(rows, cols)); break;
        case Architecture::Lstm: spec = build_lstm_pretrain(sequence_input(rows, cols)); break;
        case Architecture::ResnetMini:
            spec = build_resnet_mini_pretrain(resnet_depth, resnet_stem_channels, image_input(rows, cols));
            break;
    }
    return train(spec, train_examples, cfg);
}

/// Transfer-learning head swap: drops everything from the second-to-last
/// dense layer onward and appends a fresh dense(16) -> relu ->
/// dense(classes) -> softmax head. Every retained backbone block is copied
/// bit-exact from the checkpoint.
inline nn::Network head_swap(const nn::Checkpoint& pretrained, int classes, std::uint64_t head_seed) {
    if (classes != 2 && classes != 3) throw std::invalid_argument("head_swap: classes must be 2 or 3");
    if (pretrained.spec.classes != 3) {
        throw std::invalid_argument("head_swap: expected a 3-class pre-training checkpoint");
    }
    std::vector<std::size_t> dense_indices;
    for (std::size_t i = 0; i < pretrained.spec.layers.size(); ++i) {
        if (pretrained.spec.layers[i].kind == nn::LayerKind::Dense) dense_indices.push_back(i);
    }
    if (dense_indices.size() < 2) {
        throw std::invalid_argument("head_swap: checkpoint architecture lacks the two-layer head");
    }
    const std::size_t cut = dense_indices[dense_indices.size() - 2];

    nn::NetworkSpec swapped;
    swapped.input_shape = pretrained.spec.input_shape;
    swapped.classes = classes;
    swapped.layers.assign(pretrained.spec.layers.begin(),
                          pretrained.spec.layers.begin() + static_cast<std::ptrdiff_t>(cut));
    swapped.layers.push_back(nn::LayerSpec::dense(16));
    swapped.layers.push_back(nn::LayerSpec::relu());
    swapped.layers.push_back(nn::LayerSpec::dense(classes));
    swapped.layers.push_back(nn::LayerSpec::softmax());

    nn::Network net(swapped, head_seed);

    // overwrite the retained backbone blocks bit-exact; the checkpoint's
    // block order matches spec order, so backbone blocks come first
    std::size_t backbone_blocks = 0;
    for (const auto& name : pretrained.block_names) {
        const auto layer_idx = std::stoul(name.substr(5, name.find('.') - 5));
        if (layer_idx < cut) ++backbone_blocks;
    }
    auto params = net.snapshot_parameters();
    for (std::size_t i = 0; i < backbone_blocks; ++i) params[i] = pretrained.blocks[i];
    net.restore_parameters(params);
    return net;
}

/// Fine-tuning is ordinary training with every layer trainable.
inline TrainResult finetune(nn::Network& swapped, const std::vector<TrainExample>& examples,
                            const TrainConfig& cfg) {
    return train_network(swapped, examples, cfg);
}

}  // namespace coughpipe::models
