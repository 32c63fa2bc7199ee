#pragma once

#include <functional>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "coughpipe/audio/recording.hpp"
#include "coughpipe/balance/smote.hpp"
#include "coughpipe/common.hpp"
#include "coughpipe/eval/folds.hpp"
#include "coughpipe/eval/metrics.hpp"
#include "coughpipe/eval/report.hpp"
#include "coughpipe/features/extract.hpp"
#include "coughpipe/models/build.hpp"
#include "coughpipe/models/train.hpp"
#include "coughpipe/parallel.hpp"

namespace coughpipe::eval {

struct GridSpace {
    std::vector<features::FeatureConfig> feature_configs;
    std::vector<models::ClassifierConfig> classifier_configs;
};

struct NestedCvOptions {
    Task task = Task::TwoClass;
    models::Architecture arch = models::Architecture::Cnn;
    std::uint64_t seed = 0;
    int outer_k = 5;
    int inner_k = 4;
    models::TrainConfig train;  // learning rate / batch size come from each grid cell
    int smote_k_neighbors = 5;
    std::optional<nn::Checkpoint> pretrained;  // transfer mode when set
    int resnet_depth = 1;
    int resnet_stem_channels = 8;
    int workers = 1;
    double threshold = 0.5;
    /// Feature source; defaults to direct extraction. The CLI plugs in a
    /// disk-cache-backed provider here.
    std::function<features::FeatureMatrix(const audio::Recording&, const features::FeatureConfig&)>
        feature_provider;
};

struct NestedCvResult {
    MetricsReport report;
    std::vector<nn::Checkpoint> fold_checkpoints;
};

namespace detail {

inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0, std::uint64_t c = 0) {
    std::uint64_t h = seed;
    for (std::uint64_t v : {a, b, c}) {
        h ^= v + 0x9e3779b97f4a7c15ull + (h << 6) + (h >> 2);
        h *= 0xff51afd7ed558ccdull;
    }
    return h;
}

inline nn::NetworkSpec build_arch(const NestedCvOptions& opt, const models::ClassifierConfig& cfg,
                                  std::size_t rows, std::size_t cols, int classes) {
    switch (opt.arch) {
        case models::Architecture::Cnn:
            return models::build_cnn(cfg, models::image_input(rows, cols), classes);
        case models::Architecture::Lstm:
            return models::build_lstm(cfg, models::sequence_input(rows, cols), classes);
        case models::Architecture::ResnetMini:
            return models::build_resnet_mini(opt.resnet_depth, opt.resnet_stem_channels,
                                             models::image_input(rows, cols), classes);
    }
    throw std::invalid_argument("unknown architecture");
}

inline std::vector<std::size_t> index_range(std::size_t n) {
    std::vector<std::size_t> idx(n);
    for (std::size_t i = 0; i < n; ++i) idx[i] = i;
    return idx;
}

/// Trains one candidate on `train_set` (already SMOTE balanced) and scores
/// event-level F1 on the held-out examples.
struct CellRun {
    models::TrainResult result;
    double holdout_f1 = 0.0;
};

inline CellRun run_cell(const NestedCvOptions& opt, const models::ClassifierConfig& cls_cfg,
                        const std::vector<features::FeatureMatrix>& train_set,
                        const std::vector<models::TrainExample>& holdout, std::size_t rows, std::size_t cols,
                        std::uint64_t run_seed) {
    const int classes = task_class_count(opt.task);
    models::TrainConfig tc = opt.train;
    tc.seed = run_seed;
    tc.learning_rate = cls_cfg.learning_rate;
    tc.batch_size = cls_cfg.batch_size;

    std::vector<models::TrainExample> train_examples;
    train_examples.reserve(train_set.size());
    for (const auto& fm : train_set) {
        train_examples.push_back({&fm, task_class_index(opt.task, fm.label)});
    }

    CellRun run;
    if (opt.pretrained) {
        nn::Network net = models::head_swap(*opt.pretrained, classes, run_seed);
        run.result = models::train_network(net, train_examples, tc);
        run.holdout_f1 = holdout.empty() ? 0.0
                                         : models::event_f1(net, holdout,
                                                                    index_range(holdout.size()), classes);
    } else {
        nn::Network net(build_arch(opt, cls_cfg, rows, cols, classes), run_seed);
        run.result = models::train_network(net, train_examples, tc);
        run.holdout_f1 = holdout.empty() ? 0.0
                                         : models::event_f1(net, holdout,
                                                                    index_range(holdout.size()), classes);
    }
    return run;
}

}  // namespace detail

/// Runs the full nested cross-validation protocol: the inner folds pick the
/// (feature, classifier) pair with the highest mean event-level F1, the
/// winner is retrained on the whole outer-training set (SMOTE balanced),
/// and the untouched outer test set supplies the fold's metrics. Scores
/// from all outer test folds are pooled into one ROC for the two-class
/// task.
inline NestedCvResult nested_cv(const std::vector<audio::Recording>& events, const GridSpace& grid,
                                const NestedCvOptions& opt) {
    if (events.empty()) throw std::invalid_argument("nested_cv: no events");
    if (grid.feature_configs.empty() || grid.classifier_configs.empty()) {
        throw std::invalid_argument("nested_cv: empty grid");
    }
    const int classes = task_class_count(opt.task);

    std::map<std::string, int> patient_class;
    for (const auto& r : events) {
        const int cls = task_class_index(opt.task, r.label);
        if (cls < 0) {
            throw std::invalid_argument("nested_cv: label '" + std::string(label_name(r.label)) +
                                        "' (event '" + r.event_id + "') is not valid for task " +
                                        task_name(opt.task));
        }
        auto [it, inserted] = patient_class.emplace(r.patient_id, cls);
        (void)it;
        (void)inserted;
    }

    // transfer mode: every feature config must produce the checkpoint's input shape
    if (opt.pretrained) {
        for (const auto& fc : grid.feature_configs) {
            const auto rows = static_cast<std::size_t>(fc.rows());
            const auto cols = static_cast<std::size_t>(fc.cols());
            const auto expected = opt.pretrained->spec.input_shape;
            const auto actual = expected.size() == 3 ? models::image_input(rows, cols)
                                                     : models::sequence_input(rows, cols);
            if (actual != expected) {
                throw std::invalid_argument(
                    "nested_cv: feature config does not match the pre-trained checkpoint input shape");
            }
        }
    }

    // extract features once per (feature config, event)
    std::vector<std::vector<features::FeatureMatrix>> feats(grid.feature_configs.size());
    for (std::size_t fi = 0; fi < grid.feature_configs.size(); ++fi) {
        feats[fi].resize(events.size());
        parallel_for(events.size(), opt.workers, [&, fi](std::size_t ei) {
            feats[fi][ei] = opt.feature_provider
                                ? opt.feature_provider(events[ei], grid.feature_configs[fi])
                                : features::extract_features(events[ei], grid.feature_configs[fi]);
        });
    }

    const FoldPlan plan = make_folds(patient_class, opt.outer_k, opt.inner_k, opt.seed);

    struct FoldOutcome {
        FoldMetrics metrics;
        nn::Checkpoint checkpoint;
        std::vector<double> pooled_scores;
        std::vector<int> pooled_truths;
    };
    std::vector<FoldOutcome> outcomes(plan.outer.size());

    parallel_for(plan.outer.size(), opt.workers, [&](std::size_t f) {
        const auto& fold = plan.outer[f];
        const std::set<std::string> test_patients(fold.test_patients.begin(), fold.test_patients.end());

        // inner grid search
        double best_score = -1.0;
        std::size_t best_fi = 0, best_ci = 0;
        for (std::size_t fi = 0; fi < grid.feature_configs.size(); ++fi) {
            const auto rows = static_cast<std::size_t>(grid.feature_configs[fi].rows());
            const auto cols = static_cast<std::size_t>(grid.feature_configs[fi].cols());
            for (std::size_t ci = 0; ci < grid.classifier_configs.size(); ++ci) {
                double score_sum = 0.0;
                for (std::size_t g = 0; g < fold.inner_folds.size(); ++g) {
                    const std::set<std::string> val_patients(fold.inner_folds[g].begin(),
                                                             fold.inner_folds[g].end());
                    std::vector<balance::TaggedExample> smote_in;
                    std::vector<models::TrainExample> holdout;
                    for (std::size_t ei = 0; ei < events.size(); ++ei) {
                        const auto& fm = feats[fi][ei];
                        if (test_patients.count(fm.patient_id)) continue;
                        if (val_patients.count(fm.patient_id)) {
                            holdout.push_back({&fm, task_class_index(opt.task, fm.label)});
                        } else {
                            smote_in.push_back({fm, balance::FoldTag::Train});
                        }
                    }
                    balance::SmoteConfig sc;
                    sc.k_neighbors = opt.smote_k_neighbors;
                    sc.seed = detail::mix_seed(opt.seed, f, fi * 100 + ci, g);
                    const auto train_set = balance::smote(smote_in, sc);
                    const auto run = detail::run_cell(opt, grid.classifier_configs[ci], train_set, holdout, rows,
                                                      cols, detail::mix_seed(opt.seed, f + 1, fi * 100 + ci, g));
                    score_sum += run.holdout_f1;
                }
                const double mean_score = score_sum / static_cast<double>(fold.inner_folds.size());
                if (mean_score > best_score) {
                    best_score = mean_score;
                    best_fi = fi;
                    best_ci = ci;
                }
            }
        }

        // retrain the winning cell on the full outer-training set
        const auto& fc = grid.feature_configs[best_fi];
        const auto rows = static_cast<std::size_t>(fc.rows());
        const auto cols = static_cast<std::size_t>(fc.cols());
        std::vector<balance::TaggedExample> smote_in;
        std::vector<models::TrainExample> test_examples;
        for (std::size_t ei = 0; ei < events.size(); ++ei) {
            const auto& fm = feats[best_fi][ei];
            if (test_patients.count(fm.patient_id)) {
                test_examples.push_back({&fm, task_class_index(opt.task, fm.label)});
            } else {
                smote_in.push_back({fm, balance::FoldTag::Train});
            }
        }
        balance::SmoteConfig sc;
        sc.k_neighbors = opt.smote_k_neighbors;
        sc.seed = detail::mix_seed(opt.seed, f, 7777, 0);
        const auto train_set = balance::smote(smote_in, sc);

        models::TrainConfig tc = opt.train;
        tc.seed = detail::mix_seed(opt.seed, f, 9999, 0);
        tc.learning_rate = grid.classifier_configs[best_ci].learning_rate;
        tc.batch_size = grid.classifier_configs[best_ci].batch_size;

        std::vector<models::TrainExample> train_examples;
        for (const auto& fm : train_set) {
            train_examples.push_back({&fm, task_class_index(opt.task, fm.label)});
        }

        models::TrainResult tr;
        std::optional<nn::Network> net;
        if (opt.pretrained) {
            net.emplace(models::head_swap(*opt.pretrained, classes, tc.seed));
            tr = models::train_network(*net, train_examples, tc);
        } else {
            net.emplace(detail::build_arch(opt, grid.classifier_configs[best_ci], rows, cols, classes), tc.seed);
            tr = models::train_network(*net, train_examples, tc);
        }

        // evaluate the untouched outer test set, one evaluation per event
        for (const auto& te : test_examples) {
            if (te.features->synthetic) throw std::logic_error("nested_cv: synthetic example in test fold");
        }
        const auto probs = models::predict_probs(*net, test_examples,
                                                         detail::index_range(test_examples.size()));
        std::vector<int> preds, truths;
        FoldOutcome& out = outcomes[f];
        for (std::size_t i = 0; i < test_examples.size(); ++i) {
            EventScore es;
            es.event_id = test_examples[i].features->event_id;
            es.patient_id = test_examples[i].features->patient_id;
            es.true_label = test_examples[i].class_index;
            es.per_frame_probs = {probs[i]};
            es.aggregated = aggregate(es.per_frame_probs);
            preds.push_back(classify_event(es.aggregated, opt.threshold));
            truths.push_back(es.true_label);
            if (classes == 2) {
                out.pooled_scores.push_back(es.aggregated[1]);
                out.pooled_truths.push_back(es.true_label == 1 ? 1 : 0);
            }
        }

        out.metrics.fold = static_cast<int>(f);
        out.metrics.f1 = f1_score(preds, truths, classes == 2 ? F1Mode::PositiveClass : F1Mode::Macro, classes);
        out.metrics.accuracy = accuracy(preds, truths);
        if (classes == 2) {
            bool both = false;
            for (int t : truths) both = both || t != truths.front();
            if (both) out.metrics.auc = auc(roc_curve(out.pooled_scores, out.pooled_truths));
        }
        out.metrics.best_feature = fc;
        out.metrics.best_classifier = grid.classifier_configs[best_ci];

        nlohmann::json meta = tr.checkpoint.metadata;
        meta["fold"] = static_cast<int>(f);
        meta["best_feature"] = features::feature_config_to_json(fc);
        meta["best_classifier"] = models::classifier_config_to_json(grid.classifier_configs[best_ci]);
        tr.checkpoint.metadata = meta;
        out.checkpoint = std::move(tr.checkpoint);
    });

    NestedCvResult result;
    result.report.task = task_name(opt.task);
    result.report.architecture =
        std::string(models::architecture_name(opt.arch)) + (opt.pretrained ? "+transfer" : "");
    result.report.seed = opt.seed;
    if (opt.pretrained) result.report.head_widths = {16, classes};

    std::vector<double> fold_f1s;
    std::vector<double> pooled_scores;
    std::vector<int> pooled_truths;
    double acc_sum = 0.0;
    for (auto& o : outcomes) {
        result.report.folds.push_back(o.metrics);
        result.fold_checkpoints.push_back(std::move(o.checkpoint));
        fold_f1s.push_back(o.metrics.f1);
        acc_sum += o.metrics.accuracy;
        pooled_scores.insert(pooled_scores.end(), o.pooled_scores.begin(), o.pooled_scores.end());
        pooled_truths.insert(pooled_truths.end(), o.pooled_truths.begin(), o.pooled_truths.end());
    }
    double f1_sum = 0.0;
    for (double v : fold_f1s) f1_sum += v;
    result.report.mean_f1 = f1_sum / static_cast<double>(fold_f1s.size());
    result.report.sigma_f1 = population_stddev(fold_f1s);
    result.report.mean_accuracy = acc_sum / static_cast<double>(outcomes.size());

    if (classes == 2 && !pooled_scores.empty()) {
        result.report.pooled_roc = roc_curve(pooled_scores, pooled_truths);
        result.report.pooled_auc = auc(result.report.pooled_roc);
        result.report.sensitivity_at_spec70 = sensitivity_at_specificity(result.report.pooled_roc, 0.70);
        result.report.sensitivity_at_spec80 = sensitivity_at_specificity(result.report.pooled_roc, 0.80);
        result.report.triage_pass = who_triage_check(result.report.pooled_roc).pass;
    }
    return result;
}

}  // namespace coughpipe::eval
