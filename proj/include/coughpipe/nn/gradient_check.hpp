#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "coughpipe/nn/network.hpp"

namespace coughpipe::nn {

struct GradCheckBlock {
    std::string name;
    double max_rel_err = 0.0;
};

struct GradCheckReport {
    std::vector<GradCheckBlock> blocks;
    double max_rel_err = 0.0;
};

/// Compares analytic gradients against central finite differences for every
/// trainable parameter. Dropout is disabled for the duration; batchnorm runs
/// in training mode (batch statistics) on both paths so the two losses are
/// the same function. Relative error uses a floored denominator so blocks
/// whose true gradient is zero report ~0 instead of noise ratios.
inline GradCheckReport gradient_check(Network& net, const Tensor& batch, const std::vector<int>& labels,
                                      double epsilon = 1e-5) {
    if (net.parameter_count() >= 100000) {
        throw std::invalid_argument("gradient_check: too many parameters to enumerate");
    }
    net.set_dropout_enabled(false);

    net.zero_grads();
    net.forward(batch, true);
    const double base_loss = net.loss(labels);
    if (!std::isfinite(base_loss)) {
        net.set_dropout_enabled(true);
        throw std::runtime_error("gradient_check: non-finite loss");
    }
    net.backward(labels);

    std::vector<std::vector<double>> analytic;
    for (const ParamBlock* b : net.param_blocks()) analytic.push_back(b->grad.data);

    GradCheckReport report;
    const auto& blocks = net.param_blocks();
    for (std::size_t bi = 0; bi < blocks.size(); ++bi) {
        ParamBlock* b = blocks[bi];
        GradCheckBlock rb{net.block_names()[bi], 0.0};
        if (b->trainable) {
            for (std::size_t i = 0; i < b->value.size(); ++i) {
                const double saved = b->value[i];
                b->value[i] = saved + epsilon;
                net.forward(batch, true);
                const double lp = net.loss(labels);
                b->value[i] = saved - epsilon;
                net.forward(batch, true);
                const double lm = net.loss(labels);
                b->value[i] = saved;
                const double numeric = (lp - lm) / (2.0 * epsilon);
                const double a = analytic[bi][i];
                const double rel = std::fabs(a - numeric) / std::max(std::fabs(a) + std::fabs(numeric), 1e-5);
                rb.max_rel_err = std::max(rb.max_rel_err, rel);
            }
        }
        report.max_rel_err = std::max(report.max_rel_err, rb.max_rel_err);
        report.blocks.push_back(std::move(rb));
    }
    net.set_dropout_enabled(true);
    return report;
}

}  // namespace coughpipe::nn
