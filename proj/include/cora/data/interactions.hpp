// Copyright (c) 2026, The cora authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <charconv>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

#include "cora/error.hpp"

namespace cora::data {

struct Interaction {
    std::size_t user = 0;
    std::size_t item = 0;
    int label = 0;
    std::int64_t timestamp = 0;

    friend bool operator==(const Interaction&, const Interaction&) = default;
};

// Chronological key with the documented tie-break on (user, item, label).
inline auto chronological_key(const Interaction& r) { return std::tie(r.timestamp, r.user, r.item, r.label); }

struct HistoryEntry {
    std::size_t item = 0;
    int label = 0;
    std::int64_t timestamp = 0;
};

/// Item titles plus each user's interactions in timestamp order.
class Catalog {
public:
    Catalog() = default;

    Catalog(std::vector<std::string> titles, const std::vector<Interaction>& interactions)
        : titles_(std::move(titles)) {
        std::size_t users = 0;
        for (const Interaction& r : interactions) {
            if (r.item >= titles_.size()) {
                throw ReferenceError("item " + std::to_string(r.item) + " has no title");
            }
            users = std::max(users, r.user + 1);
        }
        histories_.resize(users);
        std::vector<Interaction> sorted = interactions;
        std::stable_sort(sorted.begin(), sorted.end(),
                         [](const Interaction& a, const Interaction& b) { return chronological_key(a) < chronological_key(b); });
        for (const Interaction& r : sorted) {
            histories_[r.user].push_back({r.item, r.label, r.timestamp});
        }
    }

    std::size_t item_count() const noexcept { return titles_.size(); }
    std::size_t user_count() const noexcept { return histories_.size(); }

    const std::string& title(std::size_t item) const {
        if (item >= titles_.size()) {
            throw IndexError("title: unknown item " + std::to_string(item));
        }
        return titles_[item];
    }
    const std::vector<std::string>& titles() const noexcept { return titles_; }

    const std::vector<HistoryEntry>& history(std::size_t user) const {
        static const std::vector<HistoryEntry> none;
        return user < histories_.size() ? histories_[user] : none;
    }

    /// Items the user rated positively strictly before `timestamp`, oldest first.
    std::vector<std::size_t> liked_before(std::size_t user, std::int64_t timestamp) const {
        std::vector<std::size_t> out;
        for (const HistoryEntry& h : history(user)) {
            if (h.timestamp >= timestamp) {
                break;
            }
            if (h.label == 1) {
                out.push_back(h.item);
            }
        }
        return out;
    }

private:
    std::vector<std::string> titles_;
    std::vector<std::vector<HistoryEntry>> histories_;
};

struct Dataset {
    std::vector<Interaction> interactions;
    Catalog catalog;
};

namespace detail {

inline std::vector<std::string_view> split_tabs(std::string_view line) {
    std::vector<std::string_view> fields;
    std::size_t start = 0;
    for (;;) {
        const std::size_t tab = line.find('\t', start);
        fields.push_back(line.substr(start, tab == std::string_view::npos ? std::string_view::npos : tab - start));
        if (tab == std::string_view::npos) {
            return fields;
        }
        start = tab + 1;
    }
}

template <class T>
T parse_number(std::string_view text, std::size_t line, const char* what) {
    T value{};
    const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec != std::errc() || ptr != text.data() + text.size() || text.empty()) {
        throw ParseError(std::string("bad ") + what + " '" + std::string(text) + "'", line);
    }
    return value;
}

inline std::string_view strip_cr(std::string_view s) {
    if (!s.empty() && s.back() == '\r') {
        s.remove_suffix(1);
    }
    return s;
}

inline std::ifstream open_input(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw IoError("cannot open '" + path + "'");
    }
    return in;
}

inline std::ofstream open_output(const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw IoError("cannot open '" + path + "' for writing");
    }
    return out;
}

} // namespace detail

inline constexpr double kDefaultRatingThreshold = 3.0;
inline constexpr std::string_view kInteractionsHeader = "user_id\titem_id\trating\ttimestamp";
inline constexpr std::string_view kTitlesHeader = "item_id\ttitle";

/// Parses the interactions TSV. Ratings above `threshold` become label 1.
inline std::vector<Interaction> parse_interactions(std::istream& in, double threshold = kDefaultRatingThreshold) {
    std::vector<Interaction> out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const std::string_view row = detail::strip_cr(line);
        if (line_no == 1) {
            if (row != kInteractionsHeader) {
                throw ParseError("expected header '" + std::string(kInteractionsHeader) + "'", line_no);
            }
            continue;
        }
        if (row.empty()) {
            continue;
        }
        const auto f = detail::split_tabs(row);
        if (f.size() != 4) {
            throw ParseError("expected 4 fields, got " + std::to_string(f.size()), line_no);
        }
        Interaction r;
        r.user = detail::parse_number<std::size_t>(f[0], line_no, "user_id");
        r.item = detail::parse_number<std::size_t>(f[1], line_no, "item_id");
        const double rating = detail::parse_number<double>(f[2], line_no, "rating");
        r.label = rating > threshold ? 1 : 0;
        r.timestamp = detail::parse_number<std::int64_t>(f[3], line_no, "timestamp");
        out.push_back(r);
    }
    return out;
}

/// Parses the titles TSV into a dense id -> title vector.
inline std::vector<std::string> parse_titles(std::istream& in) {
    std::map<std::size_t, std::string> by_id;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const std::string_view row = detail::strip_cr(line);
        if (line_no == 1) {
            if (row != kTitlesHeader) {
                throw ParseError("expected header '" + std::string(kTitlesHeader) + "'", line_no);
            }
            continue;
        }
        if (row.empty()) {
            continue;
        }
        const std::size_t tab = row.find('\t');
        if (tab == std::string_view::npos) {
            throw ParseError("expected item_id<TAB>title", line_no);
        }
        const auto id = detail::parse_number<std::size_t>(row.substr(0, tab), line_no, "item_id");
        if (!by_id.emplace(id, std::string(row.substr(tab + 1))).second) {
            throw ParseError("duplicate item_id " + std::to_string(id), line_no);
        }
    }
    std::vector<std::string> titles;
    titles.reserve(by_id.size());
    for (const auto& [id, title] : by_id) {
        if (id != titles.size()) {
            throw ReferenceError("titles: item ids must be dense, missing " + std::to_string(titles.size()));
        }
        titles.push_back(title);
    }
    return titles;
}

inline Dataset load_interactions(const std::string& interactions_path, const std::string& titles_path,
                                 double threshold = kDefaultRatingThreshold) {
    auto in = detail::open_input(interactions_path);
    auto interactions = parse_interactions(in, threshold);
    auto tin = detail::open_input(titles_path);
    auto titles = parse_titles(tin);
    Catalog catalog(std::move(titles), interactions);
    return {std::move(interactions), std::move(catalog)};
}

/// Binary labels are written as ratings 5 / 1 so that loading with the
/// default threshold restores them.
inline void write_interactions(std::ostream& out, const std::vector<Interaction>& interactions) {
    out << kInteractionsHeader << '\n';
    for (const Interaction& r : interactions) {
        out << r.user << '\t' << r.item << '\t' << (r.label == 1 ? 5 : 1) << '\t' << r.timestamp << '\n';
    }
}

inline void write_titles(std::ostream& out, const std::vector<std::string>& titles) {
    out << kTitlesHeader << '\n';
    for (std::size_t i = 0; i < titles.size(); ++i) {
        out << i << '\t' << titles[i] << '\n';
    }
}

inline void save_dataset(const Dataset& ds, const std::string& interactions_path, const std::string& titles_path) {
    auto out = detail::open_output(interactions_path);
    write_interactions(out, ds.interactions);
    auto tout = detail::open_output(titles_path);
    write_titles(tout, ds.catalog.titles());
    if (!out || !tout) {
        throw IoError("write failed for dataset files");
    }
}

} // namespace cora::data
