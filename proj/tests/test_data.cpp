// Copyright (c) 2026, The cora authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>
#include <set>
#include <sstream>
#include <tuple>

#include "cora/data.hpp"
#include "support/oracles.hpp"

using namespace cora;
using namespace cora::data;
namespace t = cora::testing;

namespace {

std::vector<Interaction> random_interactions(Rng& rng, std::size_t n, std::size_t users, std::size_t items,
                                             std::int64_t max_time) {
    std::vector<Interaction> out;
    for (std::size_t k = 0; k < n; ++k) {
        out.push_back({static_cast<std::size_t>(rng.below(users)), static_cast<std::size_t>(rng.below(items)),
                       static_cast<int>(rng.below(2)), static_cast<std::int64_t>(rng.below(max_time))});
    }
    return out;
}

std::filesystem::path temp_dir(const std::string& name) {
    auto p = std::filesystem::temp_directory_path() / ("cora_test_" + name);
    std::filesystem::create_directories(p);
    return p;
}

} // namespace

TEST(Load, BinarizesRatingsAboveThree) {
    std::istringstream in("user_id\titem_id\trating\ttimestamp\n0\t0\t5\t1\n0\t1\t2\t2\n0\t2\t4\t3\n");
    const auto rows = parse_interactions(in);
    ASSERT_EQ(rows.size(), 3u);
    EXPECT_EQ(rows[0].label, 1);
    EXPECT_EQ(rows[1].label, 0);
    EXPECT_EQ(rows[2].label, 1);
    std::istringstream edge("user_id\titem_id\trating\ttimestamp\n0\t0\t3\t1\n0\t0\t3.5\t2\n");
    const auto e = parse_interactions(edge);
    EXPECT_EQ(e[0].label, 0);
    EXPECT_EQ(e[1].label, 1);
}

TEST(Load, EmptyFilesGiveEmptyDataset) {
    const auto dir = temp_dir("empty");
    { std::ofstream(dir / "i.tsv"); std::ofstream(dir / "t.tsv"); }
    const Dataset ds = load_interactions((dir / "i.tsv").string(), (dir / "t.tsv").string());
    EXPECT_TRUE(ds.interactions.empty());
    EXPECT_EQ(ds.catalog.item_count(), 0u);
    EXPECT_EQ(ds.catalog.user_count(), 0u);
}

TEST(Load, MalformedRowReportsLineNumber) {
    std::istringstream in("user_id\titem_id\trating\ttimestamp\n0\t0\t5\t1\n0\tx\t5\t2\n");
    try {
        parse_interactions(in);
        FAIL() << "expected ParseError";
    } catch (const ParseError& e) {
        EXPECT_EQ(e.line(), 3u);
    }
    std::istringstream short_row("user_id\titem_id\trating\ttimestamp\n0\t0\t5\n");
    EXPECT_THROW(parse_interactions(short_row), ParseError);
    std::istringstream bad_header("u\ti\tr\tt\n");
    EXPECT_THROW(parse_interactions(bad_header), ParseError);
}

TEST(Load, UnknownItemIsReferenceError) {
    const std::vector<Interaction> rows = {{0, 0, 1, 1}, {0, 3, 1, 2}};
    EXPECT_THROW(Catalog({"A", "B"}, rows), ReferenceError);
}

TEST(Load, SyntheticRoundTrip) {
    const auto syn = gen_synthetic({.n_users = 12, .n_items = 9, .latent_dim = 2, .density = 0.5, .seed = 4});
    const auto dir = temp_dir("roundtrip");
    save_dataset(syn.dataset, (dir / "i.tsv").string(), (dir / "t.tsv").string());
    const Dataset back = load_interactions((dir / "i.tsv").string(), (dir / "t.tsv").string());
    EXPECT_EQ(back.interactions, syn.dataset.interactions);
    EXPECT_EQ(back.catalog.titles(), syn.dataset.catalog.titles());
}

TEST(Catalog, HistoriesAreChronological) {
    Rng rng(3);
    const auto rows = random_interactions(rng, 200, 7, 5, 1000);
    const Catalog c(std::vector<std::string>(5, "t"), rows);
    for (std::size_t u = 0; u < c.user_count(); ++u) {
        const auto& h = c.history(u);
        EXPECT_TRUE(std::is_sorted(h.begin(), h.end(),
                                   [](const HistoryEntry& a, const HistoryEntry& b) { return a.timestamp < b.timestamp; }));
    }
}

TEST(Splits, TenInteractionsSixTwoTwo) {
    std::vector<Interaction> rows;
    for (std::size_t k = 0; k < 10; ++k) {
        rows.push_back({k % 3, k, 1, static_cast<std::int64_t>(100 - k)});
    }
    const auto s = build_splits(rows, 0.2, 0.2);
    ASSERT_EQ(s.train.size(), 6u);
    ASSERT_EQ(s.valid.size(), 2u);
    ASSERT_EQ(s.test.size(), 2u);
    EXPECT_EQ(s.train.front().timestamp, 91);
    EXPECT_EQ(s.test.back().timestamp, 100);
}

TEST(Splits, IdenticalTimestampsBreakTiesByUserThenItem) {
    const std::vector<Interaction> rows = {{2, 0, 1, 5}, {0, 1, 1, 5}, {1, 0, 1, 5}, {0, 0, 1, 5}, {1, 1, 0, 5},
                                           {2, 1, 1, 5}, {0, 2, 1, 5}, {1, 2, 1, 5}, {2, 2, 0, 5}, {3, 0, 1, 5}};
    const auto s = build_splits(rows, 0.2, 0.2);
    std::vector<Interaction> all = s.train;
    all.insert(all.end(), s.valid.begin(), s.valid.end());
    all.insert(all.end(), s.test.begin(), s.test.end());
    for (std::size_t k = 1; k < all.size(); ++k) {
        EXPECT_LT(std::tie(all[k - 1].user, all[k - 1].item), std::tie(all[k].user, all[k].item));
    }
}

TEST(Splits, RejectsBadFractionsAndTinyInputs) {
    const std::vector<Interaction> rows(3, Interaction{0, 0, 1, 0});
    EXPECT_THROW(build_splits(rows, 0.2, 0.2), ConfigError);
    EXPECT_THROW(build_splits(rows, 0.0, 0.2), ConfigError);
    EXPECT_THROW(build_splits(rows, 0.6, 0.5), ConfigError);
}

TEST(Splits, PropertyChronologyDisjointnessOrderInvariance) {
    Rng rng(11);
    for (int trial = 0; trial < 50; ++trial) {
        const std::size_t n = 10 + rng.below(200);
        auto rows = random_interactions(rng, n, 1 + rng.below(20), 1 + rng.below(20), 1 + rng.below(50));
        const auto s = build_splits(rows, 0.1, 0.2);
        ASSERT_EQ(s.train.size() + s.valid.size() + s.test.size(), n);
        std::int64_t latest_train = std::numeric_limits<std::int64_t>::min();
        for (const auto& r : s.train) latest_train = std::max(latest_train, r.timestamp);
        for (const auto& r : s.test) EXPECT_GE(r.timestamp, latest_train);
        for (const auto& r : s.valid) EXPECT_GE(r.timestamp, latest_train);
        // Disjoint as positions of the input list.
        std::set<std::size_t> seen;
        for (const auto* idx : {&s.train_index, &s.valid_index, &s.test_index}) {
            for (std::size_t i : *idx) EXPECT_TRUE(seen.insert(i).second);
        }
        // Train counts agree with a direct tally.
        std::vector<std::size_t> users(s.user_train_count.size(), 0);
        for (const auto& r : s.train) ++users[r.user];
        EXPECT_EQ(users, s.user_train_count);

        auto shuffled = rows;
        rng.shuffle(shuffled);
        const auto s2 = build_splits(shuffled, 0.1, 0.2);
        EXPECT_EQ(s.train, s2.train);
        EXPECT_EQ(s.valid, s2.valid);
        EXPECT_EQ(s.test, s2.test);
    }
}

TEST(WarmCold, ThresholdZeroAllWarm) {
    Rng rng(5);
    const auto s = mark_warm_cold(build_splits(random_interactions(rng, 100, 10, 10, 1000), 0.1, 0.1), 0);
    for (bool w : s.test_warm) EXPECT_TRUE(w);
}

TEST(WarmCold, UnseenUserIsCold) {
    std::vector<Interaction> rows;
    for (std::int64_t k = 0; k < 8; ++k) rows.push_back({0, 0, 1, k});
    rows.push_back({1, 0, 1, 100});
    rows.push_back({1, 0, 0, 101});
    const auto s = build_splits(rows, 0.1, 0.1);
    ASSERT_EQ(s.test.front().user, 1u);
    for (std::size_t th : {1u, 2u, 10u}) {
        const auto m = mark_warm_cold(s, th);
        EXPECT_FALSE(m.test_warm[0]);
    }
}

TEST(WarmCold, PartitionAndMonotonicity) {
    Rng rng(6);
    for (int trial = 0; trial < 30; ++trial) {
        const auto s = build_splits(random_interactions(rng, 300, 15, 15, 10000), 0.1, 0.2);
        std::vector<bool> previous(s.test.size(), true);
        for (std::size_t th = 0; th <= 30; ++th) {
            const auto m = mark_warm_cold(s, th);
            ASSERT_EQ(m.test_warm.size(), m.test.size());
            for (std::size_t k = 0; k < m.test.size(); ++k) {
                const bool expected = m.train_count_of_user(m.test[k].user) >= th &&
                                      m.train_count_of_item(m.test[k].item) >= th;
                EXPECT_EQ(m.test_warm[k], expected);
                EXPECT_FALSE(m.test_warm[k] && !previous[k]) << "record moved cold to warm";
            }
            previous = m.test_warm;
        }
    }
}

TEST(WarmCold, ManifestRoundTrip) {
    Rng rng(8);
    const auto rows = random_interactions(rng, 80, 6, 6, 500);
    const auto s = mark_warm_cold(build_splits(rows, 0.1, 0.1), 3);
    const auto back = splits_from_manifest(nlohmann::json::parse(splits_manifest(s).dump()), rows);
    EXPECT_EQ(back.train, s.train);
    EXPECT_EQ(back.test, s.test);
    EXPECT_EQ(back.test_warm, s.test_warm);
    EXPECT_EQ(back.user_train_count, s.user_train_count);
}

TEST(Prompt, TemplateIsByteExact) {
    const std::vector<std::string> h = {"A", "B"};
    EXPECT_EQ(build_prompt(h, "C"),
              "#Question: A user has given high ratings to the following movies: A,B. Leverage the information to "
              "predict whether the user would enjoy the movie titled C? Answer with \"Yes\" or \"No\". \n#Answer:");
}

TEST(Prompt, EmptyHistoryRendersNone) {
    EXPECT_EQ(build_prompt({}, "C"),
              "#Question: A user has given high ratings to the following movies: none. Leverage the information to "
              "predict whether the user would enjoy the movie titled C? Answer with \"Yes\" or \"No\". \n#Answer:");
}

TEST(Prompt, KeepsMostRecentTitles) {
    std::vector<std::string> h;
    for (int k = 0; k < 50; ++k) h.push_back("T" + std::to_string(k));
    const std::string p = build_prompt(h, "X", 10);
    EXPECT_NE(p.find("movies: T40,T41,T42,T43,T44,T45,T46,T47,T48,T49. "), std::string::npos);
    EXPECT_EQ(p.find("T39"), std::string::npos);
    EXPECT_EQ(build_prompt(h, "X", 10), p);
}

TEST(Prompt, HistoryUsesLikedItemsStrictlyBefore) {
    const std::vector<Interaction> rows = {{0, 0, 1, 1}, {0, 1, 0, 2}, {0, 2, 1, 3}, {0, 3, 1, 3}, {0, 4, 1, 9}};
    const Catalog c({"a", "b", "c", "d", "e"}, rows);
    EXPECT_EQ(c.liked_before(0, 3), std::vector<std::size_t>{0});
    const std::string p = prompt_for({0, 4, 1, 9}, c, 10);
    EXPECT_NE(p.find("movies: a,c,d. "), std::string::npos);
    const std::string q = prompt_for({0, 4, 1, 9}, c, 10, TitleMode::Placeholder);
    EXPECT_NE(q.find("movies: Item,Item,Item. "), std::string::npos);
    EXPECT_NE(q.find("titled Item?"), std::string::npos);
}

TEST(Tokenizer, ReservedAnswerTokens) {
    const Vocabulary v = Vocabulary::build(std::vector<std::string>{"hello world"});
    EXPECT_EQ(tokenize("Yes", v), std::vector<TokenId>{kYesId});
    EXPECT_EQ(tokenize("No", v), std::vector<TokenId>{kNoId});
    EXPECT_NE(kYesId, kNoId);
    EXPECT_TRUE(tokenize("", v).empty());
    EXPECT_EQ(tokenize("zebra", v), std::vector<TokenId>{kUnkId});
}

TEST(Tokenizer, PreTokenizeConcatenatesBack) {
    Rng rng(9);
    const std::string alphabet = "ab Z9 ,.\"?#:\n\t  \xc3\xa9";
    for (int trial = 0; trial < 500; ++trial) {
        std::string s;
        const auto len = rng.below(30);
        for (std::uint64_t k = 0; k < len; ++k) s += alphabet[rng.below(alphabet.size())];
        std::string joined;
        for (const auto& p : pre_tokenize(s)) joined += p;
        EXPECT_EQ(joined, s);
    }
    EXPECT_EQ(pre_tokenize("with \"Yes\" or"), (std::vector<std::string>{"with", " \"", "Yes", "\"", " or"}));
}

TEST(Tokenizer, AnswerFollowsPromptAsOneToken) {
    const std::string p = build_prompt(std::vector<std::string>{"A"}, "B");
    const Vocabulary v = Vocabulary::build(std::vector<std::string>{p});
    auto ids = tokenize(p + "Yes", v);
    EXPECT_EQ(ids.back(), kYesId);
    ids = tokenize(p + "No", v);
    EXPECT_EQ(ids.back(), kNoId);
}

TEST(Tokenizer, CorpusRoundTripIsIdentity) {
    const auto syn = gen_synthetic({.n_users = 30, .n_items = 30, .latent_dim = 2, .density = 0.3, .seed = 1});
    const auto s = build_splits(syn.dataset.interactions, 0.1, 0.1);
    const Vocabulary v = Vocabulary::build(vocabulary_corpus(s.train, syn.dataset.catalog));
    const auto samples = make_samples(s.train, syn.dataset.catalog, v);
    for (const auto& sm : samples) {
        EXPECT_EQ(std::count(sm.tokens.begin(), sm.tokens.end(), kUnkId), 0);
        EXPECT_EQ(detokenize(sm.tokens, v), sm.prompt);
    }
    // Held-out prompts only recombine catalog titles, so they stay UNK-free too.
    for (const TitleMode mode : {TitleMode::Full, TitleMode::Placeholder}) {
        for (const auto& sm : make_samples(s.test, syn.dataset.catalog, v, {.title_mode = mode})) {
            EXPECT_EQ(detokenize(sm.tokens, v), sm.prompt);
        }
    }
    EXPECT_EQ(Vocabulary::from_json(v.to_json()), v);
}

TEST(Synthetic, FullDensityCount) {
    const auto syn = gen_synthetic({.n_users = 4, .n_items = 4, .latent_dim = 3, .density = 1.0, .seed = 2});
    EXPECT_EQ(syn.dataset.interactions.size(), 16u);
    EXPECT_THROW(gen_synthetic({.latent_dim = 0}), ConfigError);
}

TEST(Synthetic, LabelsBalancedAndTimestampsUnique) {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const auto syn = gen_synthetic({.seed = seed});
        const auto& rows = syn.dataset.interactions;
        double pos = 0;
        std::set<std::int64_t> stamps;
        for (const auto& r : rows) {
            pos += r.label;
            stamps.insert(r.timestamp);
        }
        const double frac = pos / static_cast<double>(rows.size());
        EXPECT_GE(frac, 0.45);
        EXPECT_LE(frac, 0.55);
        EXPECT_EQ(stamps.size(), rows.size());
    }
}

TEST(Synthetic, TitlesEncodeDominantCluster) {
    const auto syn = gen_synthetic({.n_items = 40, .seed = 3});
    for (std::size_t i = 0; i < 40; ++i) {
        const auto row = syn.item_latents.row_span(i);
        const std::size_t k = std::abs(row[0]) >= std::abs(row[1]) ? 0 : 1;
        const std::size_t g = 2 * k + (row[k] < 0 ? 1 : 0);
        EXPECT_EQ(syn.dataset.catalog.title(i), genre_name(g) + " " + std::to_string(i));
    }
}

TEST(Synthetic, TrueLatentsRankHeldOutPairs) {
    const auto syn = gen_synthetic({.n_users = 64, .n_items = 64, .latent_dim = 2, .density = 0.3, .seed = 0,
                                    .label_noise = 0.02});
    const auto s = build_splits(syn.dataset.interactions, 0.1, 0.2);
    std::vector<double> scores;
    std::vector<int> labels;
    for (const auto& r : s.test) {
        double dot = 0;
        for (std::size_t k = 0; k < 2; ++k) dot += syn.user_latents(r.user, k) * syn.item_latents(r.item, k);
        scores.push_back(dot);
        labels.push_back(r.label);
    }
    EXPECT_GT(t::brute_force_auc(scores, labels), 0.95);
}

TEST(Synthetic, Deterministic) {
    const auto a = gen_synthetic({.seed = 7});
    const auto b = gen_synthetic({.seed = 7});
    EXPECT_EQ(a.dataset.interactions, b.dataset.interactions);
    EXPECT_EQ(a.user_latents, b.user_latents);
    EXPECT_NE(gen_synthetic({.seed = 8}).dataset.interactions, a.dataset.interactions);
}
