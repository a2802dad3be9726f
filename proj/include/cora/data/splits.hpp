// Copyright (c) 2026, The cora authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <string>
#include <vector>

#include <json.hpp>

#include "cora/data/interactions.hpp"
#include "cora/error.hpp"

namespace cora::data {

inline constexpr std::size_t kDefaultWarmThreshold = 10;

struct DatasetSplits {
    std::vector<Interaction> train;
    std::vector<Interaction> valid;
    std::vector<Interaction> test;
    // Positions of each record in the input list, parallel to the lists above.
    std::vector<std::size_t> train_index;
    std::vector<std::size_t> valid_index;
    std::vector<std::size_t> test_index;
    std::vector<std::size_t> user_train_count;
    std::vector<std::size_t> item_train_count;
    // Parallel to `test`; empty until mark_warm_cold runs.
    std::vector<bool> test_warm;
    std::size_t warm_threshold = 0;

    std::size_t train_count_of_user(std::size_t u) const {
        return u < user_train_count.size() ? user_train_count[u] : 0;
    }
    std::size_t train_count_of_item(std::size_t i) const {
        return i < item_train_count.size() ? item_train_count[i] : 0;
    }
};

/// Global chronological split: the earliest records go to train, then
/// valid, then test. Ties on timestamp break on (user, item, label).
inline DatasetSplits build_splits(const std::vector<Interaction>& interactions, double valid_frac, double test_frac) {
    if (!(valid_frac > 0.0 && valid_frac < 1.0) || !(test_frac > 0.0 && test_frac < 1.0) ||
        valid_frac + test_frac >= 1.0) {
        throw ConfigError("split fractions must lie in (0,1) and sum below 1");
    }
    const std::size_t n = interactions.size();
    // The small epsilon keeps e.g. 10 * 0.2 from flooring to 1.
    const auto n_valid = static_cast<std::size_t>(std::floor(static_cast<double>(n) * valid_frac + 1e-9));
    const auto n_test = static_cast<std::size_t>(std::floor(static_cast<double>(n) * test_frac + 1e-9));
    if (n_valid == 0 || n_test == 0 || n_valid + n_test >= n) {
        throw ConfigError("too few interactions (" + std::to_string(n) + ") to populate train/valid/test");
    }
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return chronological_key(interactions[a]) < chronological_key(interactions[b]);
    });

    DatasetSplits s;
    const std::size_t n_train = n - n_valid - n_test;
    std::size_t users = 0, items = 0;
    for (const Interaction& r : interactions) {
        users = std::max(users, r.user + 1);
        items = std::max(items, r.item + 1);
    }
    s.user_train_count.assign(users, 0);
    s.item_train_count.assign(items, 0);
    for (std::size_t k = 0; k < n; ++k) {
        const std::size_t idx = order[k];
        const Interaction& r = interactions[idx];
        if (k < n_train) {
            s.train.push_back(r);
            s.train_index.push_back(idx);
            ++s.user_train_count[r.user];
            ++s.item_train_count[r.item];
        } else if (k < n_train + n_valid) {
            s.valid.push_back(r);
            s.valid_index.push_back(idx);
        } else {
            s.test.push_back(r);
            s.test_index.push_back(idx);
        }
    }
    return s;
}

/// A test record is warm iff both its user and its item have at least
/// `threshold` training interactions.
inline DatasetSplits mark_warm_cold(DatasetSplits splits, std::size_t threshold = kDefaultWarmThreshold) {
    splits.warm_threshold = threshold;
    splits.test_warm.assign(splits.test.size(), false);
    for (std::size_t k = 0; k < splits.test.size(); ++k) {
        const Interaction& r = splits.test[k];
        splits.test_warm[k] =
            splits.train_count_of_user(r.user) >= threshold && splits.train_count_of_item(r.item) >= threshold;
    }
    return splits;
}

inline nlohmann::json splits_manifest(const DatasetSplits& s) {
    nlohmann::json j;
    j["train"] = s.train_index;
    j["valid"] = s.valid_index;
    j["test"] = s.test_index;
    j["test_warm"] = s.test_warm;
    j["warm_threshold"] = s.warm_threshold;
    return j;
}

/// Rebuilds splits from a manifest and the original interaction list.
inline DatasetSplits splits_from_manifest(const nlohmann::json& j, const std::vector<Interaction>& interactions) {
    DatasetSplits s;
    auto take = [&](const char* key, std::vector<Interaction>& dst, std::vector<std::size_t>& idx) {
        idx = j.at(key).get<std::vector<std::size_t>>();
        for (std::size_t i : idx) {
            if (i >= interactions.size()) {
                throw ReferenceError(std::string("splits manifest: index out of range in ") + key);
            }
            dst.push_back(interactions[i]);
        }
    };
    take("train", s.train, s.train_index);
    take("valid", s.valid, s.valid_index);
    take("test", s.test, s.test_index);
    std::size_t users = 0, items = 0;
    for (const Interaction& r : interactions) {
        users = std::max(users, r.user + 1);
        items = std::max(items, r.item + 1);
    }
    s.user_train_count.assign(users, 0);
    s.item_train_count.assign(items, 0);
    for (const Interaction& r : s.train) {
        ++s.user_train_count[r.user];
        ++s.item_train_count[r.item];
    }
    s.warm_threshold = j.value("warm_threshold", std::size_t{0});
    s.test_warm = j.at("test_warm").get<std::vector<bool>>();
    if (!s.test_warm.empty() && s.test_warm.size() != s.test.size()) {
        throw ParseError("splits manifest: test_warm length differs from test", 0);
    }
    return s;
}

} // namespace cora::data
