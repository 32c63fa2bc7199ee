#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

#include "coughpipe/nn/network.hpp"

namespace coughpipe::nn {

/// Adam with the usual defaults (beta1 0.9, beta2 0.999, eps 1e-8).
/// State is kept per trainable block; non-trainable blocks (batchnorm
/// running stats) are left alone. A zero gradient leaves the parameters
/// exactly where they were.
class Adam {
public:
    explicit Adam(const std::vector<ParamBlock*>& blocks, double beta1 = 0.9, double beta2 = 0.999,
                  double eps = 1e-8)
        : beta1_(beta1), beta2_(beta2), eps_(eps) {
        for (const ParamBlock* b : blocks) {
            m_.emplace_back(b->value.size(), 0.0);
            v_.emplace_back(b->value.size(), 0.0);
        }
    }

    explicit Adam(const Network& net, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
        : Adam(net.param_blocks(), beta1, beta2, eps) {}

    void step(const std::vector<ParamBlock*>& blocks, double learning_rate) {
        if (blocks.size() != m_.size()) throw std::invalid_argument("adam: block count mismatch");
        ++t_;
        const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
        const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
        for (std::size_t bi = 0; bi < blocks.size(); ++bi) {
            ParamBlock* b = blocks[bi];
            if (!b->trainable) continue;
            for (std::size_t i = 0; i < b->value.size(); ++i) {
                const double g = b->grad[i];
                m_[bi][i] = beta1_ * m_[bi][i] + (1.0 - beta1_) * g;
                v_[bi][i] = beta2_ * v_[bi][i] + (1.0 - beta2_) * g * g;
                const double mhat = m_[bi][i] / bc1;
                const double vhat = v_[bi][i] / bc2;
                b->value[i] -= learning_rate * mhat / (std::sqrt(vhat) + eps_);
            }
        }
    }

    void step(Network& net, double learning_rate) { step(net.param_blocks(), learning_rate); }

    long steps_taken() const { return t_; }

private:
    double beta1_, beta2_, eps_;
    long t_ = 0;
    std::vector<std::vector<double>> m_, v_;
};

}  // namespace coughpipe::nn
