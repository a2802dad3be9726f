// Copyright (c) 2026, The cora authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include <json.hpp>

#include "cora/error.hpp"
#include "cora/train_eval/metrics.hpp"

namespace cora::metrics {

/// Metrics over one partition. A metric is absent when the partition is
/// empty or the metric is undefined on it.
struct PartitionMetrics {
    std::size_t count = 0;
    std::optional<double> auc;
    std::optional<double> uauc;
    std::size_t uauc_users = 0;
    std::size_t uauc_skipped = 0;
};

struct MetricsReport {
    PartitionMetrics all;
    PartitionMetrics warm;
    PartitionMetrics cold;
};

inline PartitionMetrics partition_metrics(std::span<const double> scores, std::span<const int> labels,
                                          std::span<const std::size_t> users) {
    PartitionMetrics m;
    m.count = scores.size();
    if (m.count == 0) {
        return m;
    }
    try {
        m.auc = auc(scores, labels);
    } catch (const UndefinedMetricError&) {
    }
    try {
        const UaucResult u = uauc(scores, labels, users);
        m.uauc = u.value;
        m.uauc_users = u.users_counted;
        m.uauc_skipped = u.users_skipped;
    } catch (const UndefinedMetricError&) {
        std::vector<std::size_t> distinct(users.begin(), users.end());
        std::sort(distinct.begin(), distinct.end());
        m.uauc_skipped = static_cast<std::size_t>(std::unique(distinct.begin(), distinct.end()) - distinct.begin());
    }
    return m;
}

/// AUC and UAUC on the whole test list and on its warm and cold parts.
/// `warm` may be empty, in which case both sub-partitions are empty.
inline MetricsReport evaluate(std::span<const double> scores, std::span<const int> labels,
                              std::span<const std::size_t> users, const std::vector<bool>& warm) {
    if (scores.size() != labels.size() || scores.size() != users.size()) {
        throw DimensionError("evaluate: scores, labels and users differ in length");
    }
    if (!warm.empty() && warm.size() != scores.size()) {
        throw DimensionError("evaluate: warm flags differ in length from scores");
    }
    MetricsReport r;
    r.all = partition_metrics(scores, labels, users);
    if (warm.empty()) {
        return r;
    }
    for (const bool want : {true, false}) {
        std::vector<double> s;
        std::vector<int> y;
        std::vector<std::size_t> u;
        for (std::size_t k = 0; k < scores.size(); ++k) {
            if (warm[k] == want) {
                s.push_back(scores[k]);
                y.push_back(labels[k]);
                u.push_back(users[k]);
            }
        }
        (want ? r.warm : r.cold) = partition_metrics(s, y, u);
    }
    return r;
}

inline void to_json(nlohmann::json& j, const PartitionMetrics& m) {
    j = {{"count", m.count}, {"uauc_users", m.uauc_users}, {"uauc_skipped", m.uauc_skipped}};
    j["auc"] = m.auc ? nlohmann::json(*m.auc) : nlohmann::json(nullptr);
    j["uauc"] = m.uauc ? nlohmann::json(*m.uauc) : nlohmann::json(nullptr);
}

inline void to_json(nlohmann::json& j, const MetricsReport& r) {
    j = {{"all", r.all}, {"warm", r.warm}, {"cold", r.cold}};
}

} // namespace cora::metrics
