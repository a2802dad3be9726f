// Copyright (c) 2026, The cora authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <numeric>
#include <vector>

#include <json.hpp>

#include "cora/error.hpp"
#include "cora/lm/model.hpp"
#include "cora/numerics/optim.hpp"

namespace cora::lm {

struct PretrainOptions {
    std::size_t epochs = 20;
    std::size_t batch_size = 16;
    double learning_rate = 3e-3;
    double weight_decay = 0.0;
    std::uint64_t seed = 0;
    // Train only on the final next-token prediction (the answer word).
    bool answer_only = false;
};

NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(PretrainOptions, epochs, batch_size, learning_rate, weight_decay,
                                                seed, answer_only)

struct PretrainReport {
    std::vector<double> epoch_loss;
    std::size_t steps = 0;
};

/// Next-token cross-entropy training of every LM parameter on `corpus`
/// (token sequences, each already ending with its answer word). The model
/// is left frozen afterwards.
inline PretrainReport pretrain_lm(LanguageModel& model, const std::vector<std::vector<TokenId>>& corpus,
                                  const PretrainOptions& opt,
                                  const std::function<void(std::size_t, double)>& on_epoch = {}) {
    if (corpus.empty()) {
        throw ConfigError("pretrain_lm: empty corpus");
    }
    if (opt.batch_size == 0 || !(opt.learning_rate > 0.0)) {
        throw ConfigError("pretrain_lm: batch_size and learning_rate must be positive");
    }
    for (const auto& seq : corpus) {
        if (seq.size() < 2) {
            throw ConfigError("pretrain_lm: sequences need at least two tokens");
        }
        model.check_ids(seq);
    }
    model.unfreeze();
    std::vector<Var> vars = model.params().vars();
    AdamState adam(vars, {.learning_rate = opt.learning_rate, .weight_decay = opt.weight_decay});
    Rng rng(opt.seed);
    std::vector<std::size_t> order(corpus.size());
    std::iota(order.begin(), order.end(), std::size_t{0});

    PretrainReport report;
    for (std::size_t epoch = 0; epoch < opt.epochs; ++epoch) {
        rng.shuffle(order);
        double total = 0.0;
        for (std::size_t start = 0; start < order.size(); start += opt.batch_size) {
            const std::size_t end = std::min(order.size(), start + opt.batch_size);
            const double inv = 1.0 / static_cast<double>(end - start);
            model.params().zero_grad();
            for (std::size_t k = start; k < end; ++k) {
                const auto& seq = corpus[order[k]];
                const std::span<const TokenId> input(seq.data(), seq.size() - 1);
                std::vector<std::int64_t> targets(input.size(), -1);
                for (std::size_t t = opt.answer_only ? input.size() - 1 : 0; t < input.size(); ++t) {
                    targets[t] = seq[t + 1];
                }
                const Var loss = ops::cross_entropy(model.forward(input), targets);
                const double value = loss.value()[0];
                if (!std::isfinite(value)) {
                    model.freeze();
                    throw TrainingError("pretrain_lm: non-finite loss", report.steps);
                }
                total += value;
                ops::scale(loss, inv).backward();
            }
            adam.step(vars);
            ++report.steps;
        }
        report.epoch_loss.push_back(total / static_cast<double>(corpus.size()));
        if (on_epoch) {
            on_epoch(epoch, report.epoch_loss.back());
        }
    }
    model.params().zero_grad();
    model.freeze();
    return report;
}

} // namespace cora::lm
