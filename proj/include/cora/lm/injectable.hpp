// Copyright (c) 2026, The cora authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cora/error.hpp"
#include "cora/lm/config.hpp"
#include "cora/numerics/autodiff.hpp"
#include "cora/numerics/ops.hpp"

namespace cora::lm {

/// Low-rank weight delta A [d_in x r], B [r x d_out]; the effective weight is W + A B.
struct Delta {
    Var a;
    Var b;

    std::size_t rank() const { return a.value().cols(); }
};

/// Deltas for every (layer, target) slot. Slots may share the same Delta.
class DeltaSet {
public:
    DeltaSet() = default;
    explicit DeltaSet(std::size_t layers) : slots_(layers) {}

    std::size_t layers() const noexcept { return slots_.size(); }

    void set(std::size_t layer, Target t, Delta d) { slots_.at(layer)[static_cast<std::size_t>(t)] = std::move(d); }

    const Delta* get(std::size_t layer, Target t) const {
        if (layer >= slots_.size()) {
            return nullptr;
        }
        const auto& slot = slots_[layer][static_cast<std::size_t>(t)];
        return slot ? &*slot : nullptr;
    }

    bool empty() const {
        for (const auto& layer : slots_) {
            for (const auto& slot : layer) {
                if (slot) {
                    return false;
                }
            }
        }
        return true;
    }

    /// Same slots with A scaled by `s` (a debugging and test aid).
    DeltaSet scaled(double s) const {
        DeltaSet out(slots_.size());
        for (std::size_t l = 0; l < slots_.size(); ++l) {
            for (std::size_t t = 0; t < kTargetCount; ++t) {
                if (const auto& slot = slots_[l][t]) {
                    out.slots_[l][t] = Delta{ops::scale(slot->a, s), slot->b};
                }
            }
        }
        return out;
    }

private:
    std::vector<std::array<std::optional<Delta>, kTargetCount>> slots_;
};

inline void check_delta(const Var& w, const Delta& d) {
    const Tensor& wv = w.value();
    const Tensor& a = d.a.value();
    const Tensor& b = d.b.value();
    if (a.rank() != 2 || b.rank() != 2 || a.rows() != wv.rows() || b.cols() != wv.cols() || a.cols() != b.rows()) {
        throw InjectionError("delta " + shape_string(a.shape()) + " x " + shape_string(b.shape()) +
                             " does not fit weight " + shape_string(wv.shape()));
    }
}

/// y = xW + (xA)B. Without a delta this is exactly xW.
inline Var injectable_forward(const Var& x, const Var& w, const Delta* delta) {
    Var y = ops::matmul(x, w);
    if (delta == nullptr) {
        return y;
    }
    check_delta(w, *delta);
    return ops::add(y, ops::matmul(ops::matmul(x, delta->a), delta->b));
}

/// Batched form: row i of x uses per_row[i] (nullptr for none).
inline Var injectable_forward_rows(const Var& x, const Var& w, std::span<const Delta* const> per_row) {
    const std::size_t m = x.value().rows();
    if (per_row.size() != m) {
        throw InjectionError("injectable_forward_rows: " + std::to_string(per_row.size()) + " deltas for " +
                             std::to_string(m) + " rows");
    }
    std::vector<Var> rows;
    rows.reserve(m);
    for (std::size_t i = 0; i < m; ++i) {
        rows.push_back(injectable_forward(ops::slice_rows(x, i, i + 1), w, per_row[i]));
    }
    return ops::concat_rows(rows);
}

} // namespace cora::lm
