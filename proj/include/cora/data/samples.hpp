// Copyright (c) 2026, The cora authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "cora/data/interactions.hpp"
#include "cora/data/prompt.hpp"
#include "cora/data/tokenizer.hpp"

namespace cora::data {

struct PromptSample {
    std::size_t user = 0;
    std::size_t item = 0;
    int label = 0;
    std::string prompt;
    std::vector<TokenId> tokens;
};

struct SampleOptions {
    std::size_t max_history = kDefaultHistoryLength;
    TitleMode title_mode = TitleMode::Full;
};

inline std::vector<PromptSample> make_samples(const std::vector<Interaction>& records, const Catalog& catalog,
                                              const Vocabulary& vocab, const SampleOptions& options = {}) {
    std::vector<PromptSample> out;
    out.reserve(records.size());
    for (const Interaction& r : records) {
        PromptSample s;
        s.user = r.user;
        s.item = r.item;
        s.label = r.label;
        s.prompt = prompt_for(r, catalog, options.max_history, options.title_mode);
        s.tokens = tokenize(s.prompt, vocab);
        out.push_back(std::move(s));
    }
    return out;
}

inline std::string answer_word(int label) { return label == 1 ? "Yes" : "No"; }

/// Texts the vocabulary is built from: every prompt of `records` followed by
/// its answer word, plus template renderings of every catalog title and of
/// the placeholder title.
inline std::vector<std::string> vocabulary_corpus(const std::vector<Interaction>& records, const Catalog& catalog,
                                                  std::size_t max_history = kDefaultHistoryLength) {
    std::vector<std::string> texts;
    texts.reserve(2 * records.size() + 1);
    const std::vector<std::string> placeholders(2, kPlaceholderTitle);
    texts.push_back(build_prompt(placeholders, kPlaceholderTitle, max_history) + "Yes");
    for (const Interaction& r : records) {
        texts.push_back(prompt_for(r, catalog, max_history, TitleMode::Full) + answer_word(r.label));
    }
    // Every title both after ": " / " titled " and after a comma.
    for (const std::string& t : catalog.titles()) {
        const std::vector<std::string> pair = {t, t};
        texts.push_back(build_prompt(pair, t, 2));
    }
    return texts;
}

} // namespace cora::data
