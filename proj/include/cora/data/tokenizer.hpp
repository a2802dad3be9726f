// Copyright (c) 2026, The cora authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "cora/error.hpp"

namespace cora::data {

using TokenId = std::int64_t;

inline constexpr TokenId kPadId = 0;
inline constexpr TokenId kUnkId = 1;
inline constexpr TokenId kYesId = 2;
inline constexpr TokenId kNoId = 3;

namespace detail {

inline bool is_space(unsigned char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v'; }

// Bytes >= 0x80 count as word characters so UTF-8 sequences stay whole.
inline bool is_word(unsigned char c) {
    return (c >= '0' && c <= '9') || (c >= 'A' && c <= 'Z') || (c >= 'a' && c <= 'z') || c >= 0x80;
}

} // namespace detail

/// Word-level segmentation: alphanumeric runs, single punctuation bytes and
/// whitespace runs. A lone space is glued to the token that follows it.
/// Concatenating the pieces gives back the input.
inline std::vector<std::string> pre_tokenize(std::string_view text) {
    std::vector<std::string> out;
    std::size_t i = 0;
    const std::size_t n = text.size();
    auto unit_end = [&](std::size_t p) {
        const auto c = static_cast<unsigned char>(text[p]);
        if (detail::is_word(c)) {
            while (p < n && detail::is_word(static_cast<unsigned char>(text[p]))) {
                ++p;
            }
            return p;
        }
        return p + 1;
    };
    while (i < n) {
        const auto c = static_cast<unsigned char>(text[i]);
        if (detail::is_space(c)) {
            std::size_t j = i;
            while (j < n && detail::is_space(static_cast<unsigned char>(text[j]))) {
                ++j;
            }
            if (j == i + 1 && c == ' ' && j < n) {
                const std::size_t e = unit_end(j);
                out.emplace_back(text.substr(i, e - i));
                i = e;
            } else {
                out.emplace_back(text.substr(i, j - i));
                i = j;
            }
            continue;
        }
        const std::size_t e = unit_end(i);
        out.emplace_back(text.substr(i, e - i));
        i = e;
    }
    return out;
}

class Vocabulary {
public:
    Vocabulary() : tokens_{"<pad>", "<unk>", "Yes", "No"} { reindex(); }

    /// Reserved ids first, then every distinct piece of `texts` in byte order.
    static Vocabulary build(std::span<const std::string> texts) {
        std::set<std::string> pieces;
        for (const std::string& t : texts) {
            for (std::string& p : pre_tokenize(t)) {
                pieces.insert(std::move(p));
            }
        }
        Vocabulary v;
        for (const std::string& p : pieces) {
            if (!v.index_.contains(p)) {
                v.tokens_.push_back(p);
                v.index_.emplace(p, static_cast<TokenId>(v.tokens_.size() - 1));
            }
        }
        return v;
    }

    std::size_t size() const noexcept { return tokens_.size(); }

    TokenId id_of(const std::string& piece) const {
        const auto it = index_.find(piece);
        return it == index_.end() ? kUnkId : it->second;
    }

    const std::string& token(TokenId id) const {
        if (id < 0 || static_cast<std::size_t>(id) >= tokens_.size()) {
            throw IndexError("vocabulary: id " + std::to_string(id) + " out of range");
        }
        return tokens_[static_cast<std::size_t>(id)];
    }

    const std::vector<std::string>& tokens() const noexcept { return tokens_; }

    nlohmann::json to_json() const { return tokens_; }

    static Vocabulary from_json(const nlohmann::json& j) {
        Vocabulary v;
        const auto list = j.get<std::vector<std::string>>();
        if (list.size() < 4 || list[0] != "<pad>" || list[1] != "<unk>" || list[2] != "Yes" || list[3] != "No") {
            throw ParseError("vocabulary: reserved tokens missing", 0);
        }
        v.tokens_ = list;
        v.reindex();
        if (v.index_.size() != v.tokens_.size()) {
            throw ParseError("vocabulary: duplicate tokens", 0);
        }
        return v;
    }

    friend bool operator==(const Vocabulary& a, const Vocabulary& b) { return a.tokens_ == b.tokens_; }

private:
    void reindex() {
        index_.clear();
        for (std::size_t i = 0; i < tokens_.size(); ++i) {
            index_.emplace(tokens_[i], static_cast<TokenId>(i));
        }
    }

    std::vector<std::string> tokens_;
    std::unordered_map<std::string, TokenId> index_;
};

inline std::vector<TokenId> tokenize(std::string_view text, const Vocabulary& vocab) {
    std::vector<TokenId> ids;
    for (const std::string& p : pre_tokenize(text)) {
        ids.push_back(vocab.id_of(p));
    }
    return ids;
}

inline std::string detokenize(std::span<const TokenId> ids, const Vocabulary& vocab) {
    std::string out;
    for (TokenId id : ids) {
        out += vocab.token(id);
    }
    return out;
}

} // namespace cora::data
