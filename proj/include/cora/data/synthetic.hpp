// Copyright (c) 2026, The cora authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "cora/data/interactions.hpp"
#include "cora/error.hpp"
#include "cora/numerics/rng.hpp"
#include "cora/numerics/tensor.hpp"

namespace cora::data {

struct SyntheticConfig {
    std::size_t n_users = 64;
    std::size_t n_items = 64;
    std::size_t latent_dim = 2;
    double density = 0.1;
    std::uint64_t seed = 0;
    // Probability that an item's genre word is redrawn at random.
    double title_noise = 0.0;
    // Probability that a label is flipped after thresholding.
    double label_noise = 0.0;
};

NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(SyntheticConfig, n_users, n_items, latent_dim, density, seed,
                                                title_noise, label_noise)

struct SyntheticDataset {
    Dataset dataset;
    Tensor user_latents; // [n_users x latent_dim]
    Tensor item_latents; // [n_items x latent_dim]
    double median = 0.0;
    std::vector<std::size_t> item_genre;
};

inline const std::vector<std::string>& genre_words() {
    static const std::vector<std::string> words = {
        "Drama", "Comedy", "Horror", "Action", "Romance", "Thriller", "Western", "Musical",
        "Mystery", "Fantasy", "Crime", "War", "Family", "Sport", "History", "Animation",
    };
    return words;
}

inline std::string genre_name(std::size_t g) {
    const auto& words = genre_words();
    return g < words.size() ? words[g] : "Genre" + std::to_string(g);
}

/// Dominant latent cluster: 2 * argmax_k |v_k|, plus one when that entry is negative.
inline std::size_t dominant_cluster(std::span<const double> v) {
    std::size_t best = 0;
    for (std::size_t k = 1; k < v.size(); ++k) {
        if (std::abs(v[k]) > std::abs(v[best])) {
            best = k;
        }
    }
    return 2 * best + (v[best] < 0.0 ? 1 : 0);
}

/// Users and items get standard normal latents. Each (user, item) pair is
/// observed with probability `density`; its label is 1 iff the latent dot
/// product exceeds the median over observed pairs. Titles read
/// "<Genre> <item id>" with the genre taken from the item's dominant cluster.
inline SyntheticDataset gen_synthetic(const SyntheticConfig& cfg) {
    if (cfg.latent_dim == 0) {
        throw ConfigError("gen_synthetic: latent_dim must be >= 1");
    }
    if (cfg.n_users == 0 || cfg.n_items == 0) {
        throw ConfigError("gen_synthetic: need at least one user and one item");
    }
    if (!(cfg.density >= 0.0 && cfg.density <= 1.0)) {
        throw ConfigError("gen_synthetic: density must lie in [0,1]");
    }
    if (cfg.title_noise < 0.0 || cfg.title_noise > 1.0 || cfg.label_noise < 0.0 || cfg.label_noise > 1.0) {
        throw ConfigError("gen_synthetic: noise rates must lie in [0,1]");
    }
    Rng root(cfg.seed);
    Rng latent_rng = root.fork(1);
    Rng pair_rng = root.fork(2);
    Rng time_rng = root.fork(3);
    Rng title_rng = root.fork(4);
    Rng label_rng = root.fork(5);

    SyntheticDataset out;
    out.user_latents = Tensor::randn({cfg.n_users, cfg.latent_dim}, latent_rng, 1.0);
    out.item_latents = Tensor::randn({cfg.n_items, cfg.latent_dim}, latent_rng, 1.0);

    std::vector<Interaction> records;
    std::vector<double> dots;
    for (std::size_t u = 0; u < cfg.n_users; ++u) {
        for (std::size_t i = 0; i < cfg.n_items; ++i) {
            if (cfg.density < 1.0 && pair_rng.uniform() >= cfg.density) {
                continue;
            }
            double dot = 0.0;
            for (std::size_t k = 0; k < cfg.latent_dim; ++k) {
                dot += out.user_latents(u, k) * out.item_latents(i, k);
            }
            records.push_back({u, i, 0, 0});
            dots.push_back(dot);
        }
    }
    if (!dots.empty()) {
        std::vector<double> sorted = dots;
        std::sort(sorted.begin(), sorted.end());
        const std::size_t m = sorted.size();
        out.median = m % 2 == 1 ? sorted[m / 2] : 0.5 * (sorted[m / 2 - 1] + sorted[m / 2]);
    }
    for (std::size_t k = 0; k < records.size(); ++k) {
        int label = dots[k] > out.median ? 1 : 0;
        if (cfg.label_noise > 0.0 && label_rng.uniform() < cfg.label_noise) {
            label = 1 - label;
        }
        records[k].label = label;
    }

    std::vector<std::int64_t> stamps(records.size());
    std::iota(stamps.begin(), stamps.end(), std::int64_t{1});
    time_rng.shuffle(stamps);
    for (std::size_t k = 0; k < records.size(); ++k) {
        records[k].timestamp = stamps[k];
    }

    const std::size_t clusters = 2 * cfg.latent_dim;
    std::vector<std::string> titles(cfg.n_items);
    out.item_genre.resize(cfg.n_items);
    for (std::size_t i = 0; i < cfg.n_items; ++i) {
        std::size_t g = dominant_cluster(out.item_latents.row_span(i));
        if (cfg.title_noise > 0.0 && title_rng.uniform() < cfg.title_noise) {
            g = static_cast<std::size_t>(title_rng.below(clusters));
        }
        out.item_genre[i] = g;
        titles[i] = genre_name(g) + " " + std::to_string(i);
    }
    Catalog catalog(std::move(titles), records);
    out.dataset = {std::move(records), std::move(catalog)};
    return out;
}

} // namespace cora::data
