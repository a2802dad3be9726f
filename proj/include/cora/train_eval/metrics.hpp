// Copyright (c) 2026, The cora authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cstddef>
#include <map>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "cora/error.hpp"

namespace cora::metrics {

/// Probability that a random positive outscores a random negative; ties
/// earn half credit. Computed from midranks in O(n log n).
inline double auc(std::span<const double> scores, std::span<const int> labels) {
    if (scores.size() != labels.size()) {
        throw DimensionError("auc: " + std::to_string(scores.size()) + " scores for " +
                             std::to_string(labels.size()) + " labels");
    }
    std::size_t pos = 0;
    for (int y : labels) {
        if (y != 0 && y != 1) {
            throw ValidationError("auc: labels must be 0 or 1");
        }
        pos += static_cast<std::size_t>(y);
    }
    const std::size_t n = labels.size(), neg = n - pos;
    if (pos == 0 || neg == 0) {
        throw UndefinedMetricError("auc: need at least one positive and one negative label");
    }
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
    // Sum of positive midranks (1-based).
    double rank_sum = 0.0;
    for (std::size_t i = 0; i < n;) {
        std::size_t j = i;
        std::size_t pos_in_group = 0;
        while (j < n && scores[order[j]] == scores[order[i]]) {
            pos_in_group += static_cast<std::size_t>(labels[order[j]]);
            ++j;
        }
        const double midrank = 0.5 * static_cast<double>(i + 1 + j);
        rank_sum += midrank * static_cast<double>(pos_in_group);
        i = j;
    }
    const double p = static_cast<double>(pos), q = static_cast<double>(neg);
    return (rank_sum - p * (p + 1.0) / 2.0) / (p * q);
}

struct UaucResult {
    double value = 0.0;
    std::size_t users_counted = 0;
    std::size_t users_skipped = 0;
};

/// Unweighted mean of per-user AUC over users that have both labels.
inline UaucResult uauc(std::span<const double> scores, std::span<const int> labels, std::span<const std::size_t> users) {
    if (scores.size() != labels.size() || scores.size() != users.size()) {
        throw DimensionError("uauc: scores, labels and users differ in length");
    }
    std::map<std::size_t, std::vector<std::size_t>> groups;
    for (std::size_t k = 0; k < users.size(); ++k) {
        groups[users[k]].push_back(k);
    }
    UaucResult r;
    double total = 0.0;
    for (const auto& [user, idx] : groups) {
        std::vector<double> s;
        std::vector<int> y;
        int pos = 0;
        for (std::size_t k : idx) {
            s.push_back(scores[k]);
            y.push_back(labels[k]);
            pos += labels[k];
        }
        if (pos == 0 || pos == static_cast<int>(y.size())) {
            ++r.users_skipped;
            continue;
        }
        total += auc(s, y);
        ++r.users_counted;
    }
    if (r.users_counted == 0) {
        throw UndefinedMetricError("uauc: no user has both positive and negative labels");
    }
    r.value = total / static_cast<double>(r.users_counted);
    return r;
}

} // namespace cora::metrics
