// Copyright (c) 2026, The cora authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "cora/error.hpp"
#include "cora/numerics/autodiff.hpp"

namespace cora {

struct AdamOptions {
    double learning_rate = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    double weight_decay = 0.0;
    // true: AdamW (decay applied to the weights); false: L2 term added to the gradient.
    bool decoupled = true;
};

/// Moment accumulators for one parameter list.
class AdamState {
public:
    AdamState() = default;

    AdamState(const std::vector<Var>& params, AdamOptions options) : options_(options) {
        first_.reserve(params.size());
        second_.reserve(params.size());
        for (const Var& p : params) {
            first_.emplace_back(p.shape());
            second_.emplace_back(p.shape());
        }
    }

    const AdamOptions& options() const noexcept { return options_; }
    AdamOptions& options() noexcept { return options_; }
    std::size_t step_count() const noexcept { return steps_; }
    const std::vector<Tensor>& first_moments() const noexcept { return first_; }
    const std::vector<Tensor>& second_moments() const noexcept { return second_; }

    /// One update of every parameter from its current gradient.
    /// `learning_rate` overrides the configured rate (used by warm-up schedules).
    void step(std::vector<Var>& params, double learning_rate) {
        if (params.size() != first_.size()) {
            throw DimensionError("adam: state built for " + std::to_string(first_.size()) + " parameters, got " +
                                 std::to_string(params.size()));
        }
        ++steps_;
        const double b1 = options_.beta1, b2 = options_.beta2;
        const double c1 = 1.0 - std::pow(b1, static_cast<double>(steps_));
        const double c2 = 1.0 - std::pow(b2, static_cast<double>(steps_));
        const double wd = options_.weight_decay;
        for (std::size_t k = 0; k < params.size(); ++k) {
            Var& p = params[k];
            if (p.shape() != first_[k].shape()) {
                throw DimensionError("adam: parameter shape changed");
            }
            Tensor& w = p.mutable_value();
            const bool has_grad = p.has_grad();
            Tensor& m = first_[k];
            Tensor& v = second_[k];
            for (std::size_t i = 0; i < w.size(); ++i) {
                double g = has_grad ? p.grad()[i] : 0.0;
                if (options_.decoupled) {
                    w[i] -= learning_rate * wd * w[i];
                } else {
                    g += wd * w[i];
                }
                m[i] = b1 * m[i] + (1.0 - b1) * g;
                v[i] = b2 * v[i] + (1.0 - b2) * g * g;
                const double mhat = m[i] / c1;
                const double vhat = v[i] / c2;
                w[i] -= learning_rate * mhat / (std::sqrt(vhat) + options_.epsilon);
            }
        }
    }

    void step(std::vector<Var>& params) { step(params, options_.learning_rate); }

private:
    AdamOptions options_;
    std::vector<Tensor> first_;
    std::vector<Tensor> second_;
    std::size_t steps_ = 0;
};

/// Free-function form: one AdamW update of `params` with their gradients.
inline void adamw_step(std::vector<Var>& params, AdamState& state) { state.step(params); }

} // namespace cora
