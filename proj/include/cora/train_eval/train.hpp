// Copyright (c) 2026, The cora authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <numeric>
#include <ostream>
#include <span>
#include <thread>
#include <vector>

#include <json.hpp>

#include "cora/cf/embeddings.hpp"
#include "cora/data/samples.hpp"
#include "cora/error.hpp"
#include "cora/generator/generator.hpp"
#include "cora/lm/model.hpp"
#include "cora/numerics/optim.hpp"
#include "cora/train_eval/metrics.hpp"

namespace cora::train_eval {

struct TrainConfig {
    double learning_rate = 1e-3;
    // Linear warm-up from warmup_lr to learning_rate over the first
    // warmup_frac of all optimizer steps.
    double warmup_lr = 1e-5;
    double warmup_frac = 0.05;
    double weight_decay = 0.0;
    std::size_t batch_size = 16;
    std::size_t max_epochs = 100;
    std::size_t patience = 20;
    std::uint64_t seed = 0;
    // Worker threads used for scoring. Training itself is single threaded.
    std::size_t eval_threads = 1;

    void validate() const {
        if (!(learning_rate >= 0.0) || !(warmup_lr >= 0.0) || !(weight_decay >= 0.0)) {
            throw ConfigError("train: learning rates and weight decay must be non-negative");
        }
        if (!(warmup_frac >= 0.0 && warmup_frac <= 1.0)) {
            throw ConfigError("train: warmup_frac must lie in [0,1]");
        }
        if (batch_size == 0 || max_epochs == 0 || patience == 0) {
            throw ConfigError("train: batch_size, max_epochs and patience must be >= 1");
        }
    }
};

NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(TrainConfig, learning_rate, warmup_lr, warmup_frac, weight_decay,
                                                batch_size, max_epochs, patience, seed, eval_threads)

/// Learning rate at optimizer step `step` (0-based) of `total`.
inline double scheduled_lr(const TrainConfig& cfg, std::size_t step, std::size_t total) {
    const auto warm = static_cast<std::size_t>(std::ceil(cfg.warmup_frac * static_cast<double>(total)));
    if (step >= warm) {
        return cfg.learning_rate;
    }
    // A zero target rate stays zero throughout.
    const double start = std::min(cfg.warmup_lr, cfg.learning_rate);
    const double t = static_cast<double>(step + 1) / static_cast<double>(warm);
    return start + (cfg.learning_rate - start) * t;
}

/// The three frozen or trainable parts a prediction runs through. A null
/// generator scores the prompt with the bare LM.
struct Pipeline {
    const cf::CfEmbeddings& cf;
    const generator::Generator* gen;
    const lm::LanguageModel& lm;
};

inline Var predict(const data::PromptSample& s, const Pipeline& p) {
    if (p.gen == nullptr) {
        return p.lm.score(s.tokens);
    }
    const lm::DeltaSet deltas = p.gen->generate(p.cf.user(s.user), p.cf.item(s.item));
    return p.lm.score(s.tokens, &deltas);
}

inline std::vector<double> score_samples(std::span<const data::PromptSample> samples, const Pipeline& p,
                                         std::size_t threads = 1) {
    std::vector<double> out(samples.size());
    auto work = [&](std::size_t begin, std::size_t end) {
        NoGradGuard guard;
        for (std::size_t k = begin; k < end; ++k) {
            out[k] = predict(samples[k], p).value()[0];
        }
    };
    threads = std::max<std::size_t>(1, std::min(threads, samples.size()));
    if (threads == 1) {
        work(0, samples.size());
        return out;
    }
    std::vector<std::thread> pool;
    const std::size_t chunk = (samples.size() + threads - 1) / threads;
    for (std::size_t t = 0; t < threads; ++t) {
        const std::size_t b = std::min(samples.size(), t * chunk);
        const std::size_t e = std::min(samples.size(), b + chunk);
        pool.emplace_back(work, b, e);
    }
    for (auto& th : pool) {
        th.join();
    }
    return out;
}

inline std::vector<int> labels_of(std::span<const data::PromptSample> samples) {
    std::vector<int> y;
    y.reserve(samples.size());
    for (const auto& s : samples) {
        y.push_back(s.label);
    }
    return y;
}

inline std::vector<std::size_t> users_of(std::span<const data::PromptSample> samples) {
    std::vector<std::size_t> u;
    u.reserve(samples.size());
    for (const auto& s : samples) {
        u.push_back(s.user);
    }
    return u;
}

inline double sample_auc(std::span<const data::PromptSample> samples, const Pipeline& p, std::size_t threads = 1) {
    const std::vector<double> scores = score_samples(samples, p, threads);
    return metrics::auc(scores, labels_of(samples));
}

struct TrainReport {
    std::vector<double> loss;      // mean training BCE per epoch
    std::vector<double> valid_auc; // per epoch
    std::vector<double> lr;        // rate used at the last step of each epoch
    std::size_t best_epoch = 0;    // 1-based; 0 means the initial state
    double best_valid_auc = 0.0;
    double initial_valid_auc = 0.0;
    std::size_t steps = 0;
    bool stopped_early = false;
};

inline void to_json(nlohmann::json& j, const TrainReport& r) {
    j = {{"loss", r.loss},
         {"valid_auc", r.valid_auc},
         {"lr", r.lr},
         {"best_epoch", r.best_epoch},
         {"best_valid_auc", r.best_valid_auc},
         {"initial_valid_auc", r.initial_valid_auc},
         {"steps", r.steps},
         {"stopped_early", r.stopped_early}};
}

/// Writes the per-epoch curve as CSV.
inline void write_curve(std::ostream& out, const TrainReport& r) {
    out << "epoch,loss,valid_auc,lr\n";
    for (std::size_t e = 0; e < r.loss.size(); ++e) {
        out << (e + 1) << ',' << r.loss[e] << ',' << r.valid_auc[e] << ',' << r.lr[e] << '\n';
    }
}

struct TrainHooks {
    // Called after each epoch's updates and before the freeze check.
    std::function<void(std::size_t epoch)> on_epoch_end;
    // Called with each minibatch loss before it is checked and applied.
    std::function<void(std::size_t step, double& loss)> on_step;
};

/// Fits the generator with AdamW on per-sample BCE, keeping the CF
/// embeddings and the LM fixed. The generator ends at its best validation
/// epoch (the initial state counts as epoch 0).
inline TrainReport train_cora(generator::Generator& gen, const cf::CfEmbeddings& cf_emb, const lm::LanguageModel& model,
                              std::span<const data::PromptSample> train, std::span<const data::PromptSample> valid,
                              const TrainConfig& cfg, const TrainHooks& hooks = {}) {
    cfg.validate();
    if (train.empty() || valid.empty()) {
        throw ConfigError("train: training and validation samples must be non-empty");
    }
    for (const auto& p : model.params()) {
        if (p.var.requires_grad()) {
            throw ConfigError("train: the language model must be frozen");
        }
    }
    const std::uint64_t lm_sum = model.params().checksum();
    const std::uint64_t cf_sum = cf_emb.checksum();
    auto check_frozen = [&] {
        if (model.params().checksum() != lm_sum) {
            throw ContaminationError("train: language model weights changed during training");
        }
        if (cf_emb.checksum() != cf_sum) {
            throw ContaminationError("train: collaborative embeddings changed during training");
        }
    };

    const Pipeline pipe{cf_emb, &gen, model};
    std::vector<Var> vars = gen.params().vars();
    AdamState adam(vars, AdamOptions{.learning_rate = cfg.learning_rate, .weight_decay = cfg.weight_decay});
    Rng rng(cfg.seed);
    std::vector<std::size_t> order(train.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    const std::size_t per_epoch = (train.size() + cfg.batch_size - 1) / cfg.batch_size;
    const std::size_t total = per_epoch * cfg.max_epochs;

    TrainReport rep;
    rep.initial_valid_auc = sample_auc(valid, pipe, cfg.eval_threads);
    rep.best_valid_auc = rep.initial_valid_auc;
    std::vector<Tensor> best = gen.params().snapshot();
    std::size_t since_best = 0;
    double lr = 0.0;

    for (std::size_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
        rng.shuffle(order);
        double epoch_loss = 0.0;
        for (std::size_t b = 0; b < train.size(); b += cfg.batch_size) {
            const std::size_t e = std::min(train.size(), b + cfg.batch_size);
            gen.params().zero_grad();
            double batch_loss = 0.0;
            for (std::size_t k = b; k < e; ++k) {
                const data::PromptSample& s = train[order[k]];
                const double y[1] = {static_cast<double>(s.label)};
                Var loss = ops::scale(ops::bce(predict(s, pipe), y), 1.0 / static_cast<double>(e - b));
                batch_loss += loss.value()[0];
                loss.backward();
            }
            if (hooks.on_step) {
                hooks.on_step(rep.steps, batch_loss);
            }
            if (!std::isfinite(batch_loss)) {
                throw TrainingError("train: non-finite loss", rep.steps);
            }
            lr = scheduled_lr(cfg, rep.steps, total);
            adam.step(vars, lr);
            ++rep.steps;
            epoch_loss += batch_loss * static_cast<double>(e - b);
        }
        if (hooks.on_epoch_end) {
            hooks.on_epoch_end(epoch);
        }
        check_frozen();
        const double v = sample_auc(valid, pipe, cfg.eval_threads);
        rep.loss.push_back(epoch_loss / static_cast<double>(train.size()));
        rep.valid_auc.push_back(v);
        rep.lr.push_back(lr);
        if (v > rep.best_valid_auc) {
            rep.best_valid_auc = v;
            rep.best_epoch = epoch;
            best = gen.params().snapshot();
            since_best = 0;
        } else if (++since_best >= cfg.patience) {
            rep.stopped_early = true;
            break;
        }
    }
    gen.params().restore(best);
    gen.params().zero_grad();
    return rep;
}

} // namespace cora::train_eval
