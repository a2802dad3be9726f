// Copyright (c) 2026, The cora authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "cora/cf/embeddings.hpp"
#include "cora/cf/train.hpp"
#include "cora/data/samples.hpp"
#include "cora/data/splits.hpp"
#include "cora/data/synthetic.hpp"
#include "cora/error.hpp"
#include "cora/generator/generator.hpp"
#include "cora/lm/model.hpp"
#include "cora/lm/pretrain.hpp"
#include "cora/train_eval/evaluate.hpp"
#include "cora/train_eval/train.hpp"

namespace cora::train_eval {

/// Which signals reach the frozen LM.
enum class InputMode { TextOnly, IdOnly, Combined };

NLOHMANN_JSON_SERIALIZE_ENUM(InputMode, {{InputMode::TextOnly, "text_only"},
                                         {InputMode::IdOnly, "id_only"},
                                         {InputMode::Combined, "combined"}})

inline std::string input_mode_name(InputMode m) { return nlohmann::json(m).get<std::string>(); }

/// Everything needed to go from a dataset to trained variants.
struct ExperimentConfig {
    double valid_frac = 0.1;
    double test_frac = 0.1;
    std::size_t warm_threshold = data::kDefaultWarmThreshold;
    std::size_t max_history = data::kDefaultHistoryLength;

    cf::CfModelConfig cf_model;
    cf::CfTrainConfig cf_train;
    std::vector<double> cf_learning_rates = {0.1, 0.05, 0.01};
    std::vector<double> cf_weight_decays = {1.0, 0.3, 0.1};

    lm::LmConfig lm{.vocab_size = 4, .d_model = 32, .n_heads = 4, .n_layers = 2, .d_ff = 64, .max_len = 128};
    lm::PretrainOptions lm_pretrain{.epochs = 15};
    std::uint64_t lm_seed = 0;

    generator::GeneratorConfig generator;
    TrainConfig train;
    std::vector<std::uint64_t> seeds = {0, 1, 2};
};

NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(ExperimentConfig, valid_frac, test_frac, warm_threshold, max_history,
                                                cf_model, cf_train, cf_learning_rates, cf_weight_decays, lm,
                                                lm_pretrain, lm_seed, generator, train, seeds)

/// Shared, frozen state: splits, vocabulary, CF embeddings, the pretrained
/// LM and the tokenized prompts in both title modes.
struct Stage {
    data::Dataset dataset;
    data::DatasetSplits splits;
    data::Vocabulary vocab;
    std::optional<cf::CfEmbeddings> cf;
    std::unique_ptr<lm::LanguageModel> lm;
    cf::CfGridResult cf_grid;
    lm::PretrainReport lm_report;

    struct Samples {
        std::vector<data::PromptSample> train, valid, test;
    };
    Samples full;
    Samples placeholder;

    const Samples& samples_for(InputMode m) const { return m == InputMode::IdOnly ? placeholder : full; }
};

using Progress = std::function<void(const std::string&)>;

inline Stage::Samples tokenize_splits(const data::DatasetSplits& s, const data::Catalog& catalog,
                                      const data::Vocabulary& vocab, const data::SampleOptions& opt) {
    return {data::make_samples(s.train, catalog, vocab, opt), data::make_samples(s.valid, catalog, vocab, opt),
            data::make_samples(s.test, catalog, vocab, opt)};
}

/// LM pretraining corpus: each training prompt followed by its answer.
inline std::vector<std::vector<data::TokenId>> answer_corpus(const std::vector<data::PromptSample>& samples) {
    std::vector<std::vector<data::TokenId>> corpus;
    corpus.reserve(samples.size());
    for (const auto& s : samples) {
        std::vector<data::TokenId> seq = s.tokens;
        seq.push_back(s.label == 1 ? data::kYesId : data::kNoId);
        corpus.push_back(std::move(seq));
    }
    return corpus;
}

/// Splits and tokenizes `dataset` around an existing CF embedding set and
/// frozen LM (with the vocabulary it was trained on).
inline Stage build_stage(data::Dataset dataset, const ExperimentConfig& cfg, cf::CfEmbeddings cf_emb,
                         std::unique_ptr<lm::LanguageModel> model, data::Vocabulary vocab) {
    Stage st;
    st.dataset = std::move(dataset);
    st.splits = data::mark_warm_cold(data::build_splits(st.dataset.interactions, cfg.valid_frac, cfg.test_frac),
                                     cfg.warm_threshold);
    st.vocab = std::move(vocab);
    st.cf.emplace(std::move(cf_emb));
    st.lm = std::move(model);
    const data::Catalog& catalog = st.dataset.catalog;
    st.full = tokenize_splits(st.splits, catalog, st.vocab, {cfg.max_history, data::TitleMode::Full});
    st.placeholder = tokenize_splits(st.splits, catalog, st.vocab, {cfg.max_history, data::TitleMode::Placeholder});
    return st;
}

/// Vocabulary of the training prompts plus every title.
inline data::Vocabulary training_vocabulary(const data::DatasetSplits& splits, const data::Catalog& catalog,
                                            std::size_t max_history) {
    return data::Vocabulary::build(data::vocabulary_corpus(splits.train, catalog, max_history));
}

/// Trains a fresh LM on the full-title training prompts of `splits`.
inline std::unique_ptr<lm::LanguageModel> pretrain_for(const data::DatasetSplits& splits, const data::Catalog& catalog,
                                                       const data::Vocabulary& vocab, const ExperimentConfig& cfg,
                                                       lm::PretrainReport* report = nullptr) {
    lm::LmConfig lc = cfg.lm;
    lc.vocab_size = vocab.size();
    auto model = std::make_unique<lm::LanguageModel>(lc, cfg.lm_seed);
    const auto train = data::make_samples(splits.train, catalog, vocab, {cfg.max_history, data::TitleMode::Full});
    lm::PretrainReport r = lm::pretrain_lm(*model, answer_corpus(train), cfg.lm_pretrain);
    if (report != nullptr) {
        *report = std::move(r);
    }
    return model;
}

/// Runs the CF grid search and LM pretraining, then builds the stage.
inline Stage prepare_stage(data::Dataset dataset, const ExperimentConfig& cfg, const Progress& progress = {}) {
    auto say = [&](const std::string& m) {
        if (progress) {
            progress(m);
        }
    };
    const data::DatasetSplits splits = data::build_splits(dataset.interactions, cfg.valid_frac, cfg.test_frac);
    const data::Catalog& catalog = dataset.catalog;

    say("cf: grid search");
    cf::CfGridResult grid = cf::grid_search_cf(cfg.cf_model, splits, catalog.user_count(), catalog.item_count(),
                                               cfg.cf_train, cfg.cf_learning_rates, cfg.cf_weight_decays);
    cf::CfEmbeddings emb = grid.model->export_embeddings(cf::fingerprint(splits.train));

    data::Vocabulary vocab = training_vocabulary(splits, catalog, cfg.max_history);
    say("lm: pretraining");
    lm::PretrainReport lm_report;
    auto model = pretrain_for(splits, catalog, vocab, cfg, &lm_report);

    Stage st = build_stage(std::move(dataset), cfg, std::move(emb), std::move(model), std::move(vocab));
    st.cf_grid = std::move(grid);
    st.lm_report = std::move(lm_report);
    return st;
}

struct VariantSpec {
    std::string name;
    InputMode mode = InputMode::Combined;
    std::string targets = "qkvo";
};

struct VariantResult {
    std::string name;
    std::uint64_t seed = 0;
    double valid_auc = 0.0;
    metrics::MetricsReport valid;
    metrics::MetricsReport test;
    std::optional<TrainReport> train;
    std::shared_ptr<generator::Generator> generator; // null for text-only
};

inline metrics::MetricsReport evaluate_samples(const std::vector<data::PromptSample>& samples,
                                               const std::vector<bool>& warm, const Pipeline& p,
                                               std::size_t threads) {
    const std::vector<double> scores = score_samples(samples, p, threads);
    return metrics::evaluate(scores, labels_of(samples), users_of(samples), warm);
}

/// Trains (unless text-only) and evaluates one variant for one seed.
inline VariantResult run_variant(const Stage& st, const ExperimentConfig& cfg, const VariantSpec& spec,
                                 std::uint64_t seed, const TrainHooks& hooks = {}) {
    VariantResult r;
    r.name = spec.name;
    r.seed = seed;
    const Stage::Samples& s = st.samples_for(spec.mode);
    const std::size_t threads = cfg.train.eval_threads;
    if (spec.mode == InputMode::TextOnly) {
        const Pipeline p{*st.cf, nullptr, *st.lm};
        r.valid = evaluate_samples(s.valid, {}, p, threads);
        r.valid_auc = r.valid.all.auc.value_or(0.5);
        r.test = evaluate_samples(s.test, st.splits.test_warm, p, threads);
        return r;
    }
    generator::GeneratorConfig gc = cfg.generator;
    gc.d_c = st.cf->d_c();
    gc.targets = spec.targets;
    gc.seed = seed;
    r.generator = std::make_shared<generator::Generator>(gc, st.lm->config());
    TrainConfig tc = cfg.train;
    tc.seed = seed;
    r.train = train_cora(*r.generator, *st.cf, *st.lm, s.train, s.valid, tc, hooks);
    const Pipeline p{*st.cf, r.generator.get(), *st.lm};
    r.valid = evaluate_samples(s.valid, {}, p, threads);
    r.valid_auc = r.train->best_valid_auc;
    r.test = evaluate_samples(s.test, st.splits.test_warm, p, threads);
    return r;
}

inline void to_json(nlohmann::json& j, const VariantResult& r) {
    j = {{"variant", r.name}, {"seed", r.seed}, {"valid_auc", r.valid_auc}, {"valid", r.valid}, {"test", r.test}};
    if (r.train) {
        j["train"] = *r.train;
    }
}

} // namespace cora::train_eval
