// Copyright (c) 2026, The cora authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "cora/cf/embeddings.hpp"
#include "cora/data/tokenizer.hpp"
#include "cora/generator/generator.hpp"
#include "cora/lm/model.hpp"
#include "cora/numerics/gradcheck.hpp"
#include "cora/numerics/ops.hpp"

namespace cora::train_eval {

struct PipelineCheckResult {
    double generator_error = 0.0;
    double embedding_error = 0.0;
    double lm_error = 0.0;
    std::size_t entries = 0;
    double max_error() const { return std::max({generator_error, embedding_error, lm_error}); }
};

inline void to_json(nlohmann::json& j, const PipelineCheckResult& r) {
    j = {{"generator", r.generator_error}, {"embeddings", r.embedding_error}, {"lm", r.lm_error},
         {"max", r.max_error()}, {"entries", r.entries}};
}

/// Finite-difference check of BCE through CF rows -> generator -> delta
/// injected LM (d_model 16, two layers), with respect to the generator
/// parameters, the two embedding rows and the LM weights.
inline PipelineCheckResult pipeline_grad_check(std::uint64_t seed = 0, std::size_t max_entries_per_tensor = 6) {
    const lm::LmConfig lc{.vocab_size = 12, .d_model = 16, .n_heads = 2, .n_layers = 2, .d_ff = 32, .max_len = 16};
    lm::LanguageModel model(lc, seed, 0.3);
    Rng rng(seed ^ 0x9e3779b97f4a7c15ULL);
    const cf::CfEmbeddings emb(Tensor::randn({3, 4}, rng), Tensor::randn({3, 4}, rng));

    generator::Generator gen({.k = 2, .n_blocks = 2, .d_c = 4, .heads = 2, .rank = 3, .targets = "qkvof",
                              .seed = seed},
                             lc);
    // Trained projections are nonzero; zero ones would hide most gradients.
    for (const auto& p : gen.params()) {
        if (p.name.size() >= 4 && p.name.compare(p.name.size() - 4, 4, "proj") == 0) {
            Var v = p.var;
            v.mutable_value() = Tensor::randn(v.shape(), rng, 0.3);
        }
    }
    const std::vector<std::vector<data::TokenId>> prompts = {{4, 5, 6, 7, 8}, {9, 10, 4, 11}};
    const double labels[2] = {1.0, 0.0};
    const Var eu = Var::parameter(emb.user(1).value());
    const Var ei = Var::parameter(emb.item(2).value());
    const Var eu2 = Var::parameter(emb.user(0).value());

    auto objective = [&] {
        const lm::DeltaSet d0 = gen.generate(eu, ei);
        const lm::DeltaSet d1 = gen.generate(eu2, ei);
        const Var a = ops::bce(model.score(prompts[0], &d0), std::span(labels, 1));
        const Var b = ops::bce(model.score(prompts[1], &d1), std::span(labels + 1, 1));
        return ops::add(a, b);
    };
    const GradCheckOptions opt{.max_entries_per_tensor = max_entries_per_tensor};
    PipelineCheckResult r;
    model.freeze();
    GradCheckResult g = grad_check(objective, gen.params().vars(), opt);
    r.generator_error = g.max_error;
    r.entries += g.entries_checked;
    g = grad_check(objective, {eu, ei, eu2}, opt);
    r.embedding_error = g.max_error;
    r.entries += g.entries_checked;
    model.unfreeze();
    g = grad_check(objective, model.params().vars(), opt);
    r.lm_error = g.max_error;
    r.entries += g.entries_checked;
    model.freeze();
    return r;
}

} // namespace cora::train_eval
