// Copyright (c) 2026, The cora authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include "cora/error.hpp"
#include "cora/numerics/autodiff.hpp"

namespace cora {

struct GradCheckOptions {
    double step = 1e-5;
    // Below this gradient magnitude the error is reported as an absolute difference.
    double absolute_floor = 1e-6;
    // Check at most this many entries per tensor (evenly strided); 0 = all.
    std::size_t max_entries_per_tensor = 0;
};

struct GradCheckResult {
    double max_error = 0.0;
    std::string worst_param;
    std::size_t worst_index = 0;
    double worst_analytic = 0.0;
    double worst_numeric = 0.0;
    std::size_t entries_checked = 0;
};

/// Compares tape gradients of a scalar function against central finite
/// differences. `f` must rebuild its graph from the current parameter values
/// on every call and return a size-1 Var.
///
/// Error per entry is |a - n| / max(|a|, |n|), or |a - n| when both
/// magnitudes are below `absolute_floor`.
inline GradCheckResult grad_check(const std::function<Var()>& f, std::vector<Var> params,
                                  const GradCheckOptions& options = {}) {
    for (Var& p : params) {
        p.zero_grad();
    }
    Var out = f();
    if (out.value().size() != 1 || !out.value().all_finite()) {
        throw NumericError("grad_check: objective must be a finite scalar");
    }
    out.backward();
    std::vector<Tensor> analytic;
    analytic.reserve(params.size());
    for (const Var& p : params) {
        analytic.push_back(p.grad());
    }

    auto evaluate = [&f]() {
        NoGradGuard guard;
        const double v = f().value()[0];
        if (!std::isfinite(v)) {
            throw NumericError("grad_check: non-finite objective under perturbation");
        }
        return v;
    };

    GradCheckResult result;
    for (std::size_t k = 0; k < params.size(); ++k) {
        Tensor& w = params[k].mutable_value();
        const std::size_t n = w.size();
        const std::size_t stride =
            options.max_entries_per_tensor == 0 ? 1 : std::max<std::size_t>(1, n / options.max_entries_per_tensor);
        for (std::size_t i = 0; i < n; i += stride) {
            const double saved = w[i];
            w[i] = saved + options.step;
            const double up = evaluate();
            w[i] = saved - options.step;
            const double down = evaluate();
            w[i] = saved;
            const double numeric = (up - down) / (2.0 * options.step);
            const double a = analytic[k][i];
            const double scale = std::max(std::abs(a), std::abs(numeric));
            const double err = scale < options.absolute_floor ? std::abs(a - numeric) : std::abs(a - numeric) / scale;
            ++result.entries_checked;
            if (err > result.max_error || result.worst_param.empty()) {
                if (err >= result.max_error) {
                    result.max_error = err;
                    result.worst_param = "param" + std::to_string(k);
                    result.worst_index = i;
                    result.worst_analytic = a;
                    result.worst_numeric = numeric;
                }
            }
        }
    }
    for (Var& p : params) {
        p.zero_grad();
    }
    return result;
}

} // namespace cora
