#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <iostream>
#include <map>
#include <numeric>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "coughpipe/features/feature_matrix.hpp"

namespace coughpipe::balance {

enum class FoldTag { Train, Test };

struct TaggedExample {
    features::FeatureMatrix features;
    FoldTag tag = FoldTag::Train;
};

struct SmoteConfig {
    int k_neighbors = 5;
    // Empty target map means equalize every class to the majority count.
    std::map<Label, std::size_t> explicit_targets;
    std::uint64_t seed = 0;
};

namespace detail {

inline double squared_distance(const std::vector<double>& a, const std::vector<double>& b) {
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        acc += d * d;
    }
    return acc;
}

/// Indices of the k nearest same-class neighbors of `self` (excluding self),
/// brute force, ties broken by index for determinism.
inline std::vector<std::size_t> k_nearest(const std::vector<const features::FeatureMatrix*>& pts,
                                          std::size_t self, int k) {
    std::vector<std::pair<double, std::size_t>> dist;
    dist.reserve(pts.size() - 1);
    for (std::size_t j = 0; j < pts.size(); ++j) {
        if (j == self) continue;
        dist.emplace_back(squared_distance(pts[self]->values, pts[j]->values), j);
    }
    std::sort(dist.begin(), dist.end());
    std::vector<std::size_t> out;
    out.reserve(static_cast<std::size_t>(k));
    for (int i = 0; i < k && i < static_cast<int>(dist.size()); ++i) out.push_back(dist[static_cast<std::size_t>(i)].second);
    return out;
}

}  // namespace detail

/// SMOTE oversampling of a training fold. Each synthetic sample is
/// x + lambda*(x_nn - x) with lambda uniform in [0, 1] and x_nn one of the
/// k nearest same-class neighbors under Euclidean distance on the flattened
/// matrix. Originals pass through unchanged (first, in input order);
/// synthetics follow in generation order with patient_id "synthetic".
/// Test-tagged inputs are rejected outright.
inline std::vector<features::FeatureMatrix> smote(const std::vector<TaggedExample>& examples,
                                                  const SmoteConfig& cfg) {
    if (cfg.k_neighbors < 1) throw std::invalid_argument("smote: k_neighbors must be >= 1");
    for (const auto& e : examples) {
        if (e.tag == FoldTag::Test) {
            throw std::invalid_argument("smote: refusing test-tagged example '" + e.features.event_id + "'");
        }
    }
    std::vector<features::FeatureMatrix> out;
    out.reserve(examples.size());
    for (const auto& e : examples) out.push_back(e.features);
    if (examples.empty()) return out;

    const std::size_t rows = examples.front().features.rows;
    const std::size_t cols = examples.front().features.cols;
    std::map<Label, std::vector<const features::FeatureMatrix*>> by_class;
    for (const auto& e : examples) {
        if (e.features.rows != rows || e.features.cols != cols) {
            throw std::invalid_argument("smote: all feature matrices must share one shape");
        }
        by_class[e.features.label].push_back(&e.features);
    }

    std::size_t majority = 0;
    for (const auto& [label, pts] : by_class) majority = std::max(majority, pts.size());

    std::mt19937_64 rng(cfg.seed);
    std::uniform_real_distribution<double> lambda_dist(0.0, 1.0);
    std::size_t synth_seq = 0;

    for (const auto& [label, pts] : by_class) {
        std::size_t target = majority;
        if (!cfg.explicit_targets.empty()) {
            auto it = cfg.explicit_targets.find(label);
            target = it == cfg.explicit_targets.end() ? pts.size() : it->second;
        }
        if (target <= pts.size()) continue;
        if (pts.size() < 2) {
            throw std::runtime_error(std::string("smote: class '") + label_name(label) +
                                     "' has fewer than 2 examples, cannot oversample");
        }
        int k = cfg.k_neighbors;
        if (static_cast<std::size_t>(k) >= pts.size()) {
            k = static_cast<int>(pts.size()) - 1;
            std::cerr << "smote: k_neighbors clamped to " << k << " for class '" << label_name(label) << "'\n";
        }
        std::vector<std::vector<std::size_t>> knn(pts.size());
        for (std::size_t i = 0; i < pts.size(); ++i) knn[i] = detail::k_nearest(pts, i, k);

        std::uniform_int_distribution<std::size_t> pick(0, static_cast<std::size_t>(k) - 1);
        const std::size_t n_new = target - pts.size();
        for (std::size_t j = 0; j < n_new; ++j) {
            const std::size_t base = j % pts.size();
            const std::size_t nn = knn[base][pick(rng)];
            const double lambda = lambda_dist(rng);

            features::FeatureMatrix s;
            s.rows = rows;
            s.cols = cols;
            s.config = pts[base]->config;
            s.label = label;
            s.synthetic = true;
            s.patient_id = "synthetic";
            s.event_id = std::string("smote-") + label_name(label) + "-" + std::to_string(synth_seq++);
            s.values.resize(rows * cols);
            const auto& x = pts[base]->values;
            const auto& y = pts[nn]->values;
            for (std::size_t i = 0; i < s.values.size(); ++i) s.values[i] = x[i] + lambda * (y[i] - x[i]);
            out.push_back(std::move(s));
        }
    }
    return out;
}

}  // namespace coughpipe::balance
