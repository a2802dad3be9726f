// Copyright (c) 2026, The cora authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <numeric>
#include <set>
#include <vector>

#include <json.hpp>

#include "cora/cf/models.hpp"
#include "cora/data/splits.hpp"
#include "cora/error.hpp"
#include "cora/numerics/optim.hpp"
#include "cora/train_eval/metrics.hpp"

namespace cora::cf {

struct CfTrainConfig {
    std::size_t epochs = 200;
    std::size_t batch_size = 32;
    double learning_rate = 0.05;
    double weight_decay = 0.3;
    std::size_t patience = 20;
    std::uint64_t seed = 0;
    // Sampled unobserved items per training record, labelled 0.
    std::size_t negative_ratio = 0;

    void validate() const {
        if (batch_size == 0 || patience == 0 || learning_rate < 0.0 || weight_decay < 0.0) {
            throw ConfigError("cf training: batch_size and patience must be >= 1, rates non-negative");
        }
    }
};

NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(CfTrainConfig, epochs, batch_size, learning_rate, weight_decay,
                                                patience, seed, negative_ratio)

struct CfTrainReport {
    std::vector<double> loss;
    std::vector<double> valid_auc;
    std::size_t best_epoch = 0;
    double best_valid_auc = 0.0;
    std::size_t steps = 0;
};

inline void to_json(nlohmann::json& j, const CfTrainReport& r) {
    j = {{"loss", r.loss}, {"valid_auc", r.valid_auc}, {"best_epoch", r.best_epoch},
         {"best_valid_auc", r.best_valid_auc}, {"steps", r.steps}};
}

/// AUC of sigma(e_u . e_i) on `records`.
inline double cf_auc(const CfModel& model, const std::vector<Interaction>& records) {
    NoGradGuard guard;
    const Tensor p = model.predict(records).value();
    std::vector<int> labels;
    labels.reserve(records.size());
    for (const auto& r : records) {
        labels.push_back(r.label);
    }
    return metrics::auc(p.values(), labels);
}

/// BCE training with early stopping on validation AUC; the best epoch's
/// parameters are restored at the end.
inline CfTrainReport pretrain_cf(CfModel& model, const data::DatasetSplits& splits, const CfTrainConfig& cfg) {
    cfg.validate();
    if (splits.train.empty()) {
        throw ConfigError("cf training: empty training split");
    }
    Rng rng(cfg.seed);
    std::vector<std::set<std::size_t>> seen(model.user_count());
    for (const auto& r : splits.train) {
        seen.at(r.user).insert(r.item);
    }
    std::vector<Var> vars = model.params().vars();
    AdamState adam(vars, {.learning_rate = cfg.learning_rate, .weight_decay = cfg.weight_decay});
    CfTrainReport report;
    report.best_valid_auc = -1.0;
    std::vector<Tensor> best = model.params().snapshot();
    std::size_t since_best = 0;

    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        std::vector<Interaction> rows = splits.train;
        for (std::size_t k = 0, n = splits.train.size(); k < n && cfg.negative_ratio > 0; ++k) {
            const auto& r = splits.train[k];
            if (seen[r.user].size() >= model.item_count()) {
                continue;
            }
            for (std::size_t j = 0; j < cfg.negative_ratio; ++j) {
                std::size_t item = 0;
                do {
                    item = static_cast<std::size_t>(rng.below(model.item_count()));
                } while (seen[r.user].contains(item));
                rows.push_back({r.user, item, 0, r.timestamp});
            }
        }
        rng.shuffle(rows);
        double total = 0.0;
        for (std::size_t start = 0; start < rows.size(); start += cfg.batch_size) {
            const std::size_t end = std::min(rows.size(), start + cfg.batch_size);
            const std::span<const Interaction> batch(rows.data() + start, end - start);
            std::vector<double> labels;
            for (const auto& r : batch) {
                labels.push_back(static_cast<double>(r.label));
            }
            model.params().zero_grad();
            Var loss = ops::bce(model.predict(batch), labels);
            const double value = loss.value()[0];
            if (!std::isfinite(value)) {
                throw TrainingError("cf training: non-finite loss", report.steps);
            }
            loss.backward();
            adam.step(vars);
            ++report.steps;
            total += value * static_cast<double>(batch.size());
        }
        report.loss.push_back(total / static_cast<double>(rows.size()));
        const double valid = splits.valid.empty() ? 0.0 : cf_auc(model, splits.valid);
        report.valid_auc.push_back(valid);
        if (valid > report.best_valid_auc) {
            report.best_valid_auc = valid;
            report.best_epoch = epoch;
            best = model.params().snapshot();
            since_best = 0;
        } else if (++since_best >= cfg.patience) {
            break;
        }
    }
    model.params().restore(best);
    model.params().zero_grad();
    return report;
}

struct CfGridResult {
    std::unique_ptr<CfModel> model;
    CfTrainConfig chosen;
    CfTrainReport report;
    nlohmann::json trials = nlohmann::json::array();
};

/// Trains one model per (learning rate, weight decay) pair and keeps the
/// one with the best validation AUC.
inline CfGridResult grid_search_cf(const CfModelConfig& model_cfg, const data::DatasetSplits& splits,
                                   std::size_t users, std::size_t items, CfTrainConfig base,
                                   const std::vector<double>& learning_rates, const std::vector<double>& weight_decays) {
    CfGridResult out;
    for (double lr : learning_rates) {
        for (double wd : weight_decays) {
            CfTrainConfig cfg = base;
            cfg.learning_rate = lr;
            cfg.weight_decay = wd;
            auto model = make_model(model_cfg, users, items, splits.train);
            CfTrainReport rep = pretrain_cf(*model, splits, cfg);
            out.trials.push_back({{"learning_rate", lr}, {"weight_decay", wd}, {"best_valid_auc", rep.best_valid_auc},
                                  {"best_epoch", rep.best_epoch}});
            if (!out.model || rep.best_valid_auc > out.report.best_valid_auc) {
                out.model = std::move(model);
                out.chosen = cfg;
                out.report = std::move(rep);
            }
        }
    }
    if (!out.model) {
        throw ConfigError("cf grid: empty search grid");
    }
    return out;
}

} // namespace cora::cf
