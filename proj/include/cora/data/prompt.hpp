// Copyright (c) 2026, The cora authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "cora/data/interactions.hpp"

namespace cora::data {

inline constexpr std::size_t kDefaultHistoryLength = 10;

/// Fills the recommendation question template. `history` is oldest first; only
/// its last `max_history` titles are kept. An empty history renders as "none".
inline std::string build_prompt(std::span<const std::string> history, const std::string& target,
                                std::size_t max_history = kDefaultHistoryLength) {
    std::string list;
    if (history.empty() || max_history == 0) {
        list = "none";
    } else {
        const std::size_t first = history.size() > max_history ? history.size() - max_history : 0;
        for (std::size_t i = first; i < history.size(); ++i) {
            if (i > first) {
                list += ',';
            }
            list += history[i];
        }
    }
    return "#Question: A user has given high ratings to the following movies: " + list +
           ". Leverage the information to predict whether the user would enjoy the movie titled " + target +
           "? Answer with \"Yes\" or \"No\". \n#Answer:";
}

enum class TitleMode {
    Full,        // real item titles
    Placeholder, // every title replaced by the same opaque word
};

inline constexpr const char* kPlaceholderTitle = "Item";

/// Prompt for one interaction using the user's liked items before its timestamp.
inline std::string prompt_for(const Interaction& r, const Catalog& catalog, std::size_t max_history,
                              TitleMode mode = TitleMode::Full) {
    auto title = [&](std::size_t item) {
        return mode == TitleMode::Full ? catalog.title(item) : std::string(kPlaceholderTitle);
    };
    const auto liked = catalog.liked_before(r.user, r.timestamp);
    std::vector<std::string> titles;
    titles.reserve(liked.size());
    for (std::size_t item : liked) {
        titles.push_back(title(item));
    }
    return build_prompt(titles, title(r.item), max_history);
}

} // namespace cora::data
