// Copyright (c) 2026, The cora authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <memory>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "cora/cf/embeddings.hpp"
#include "cora/data/interactions.hpp"
#include "cora/error.hpp"
#include "cora/numerics/autodiff.hpp"
#include "cora/numerics/ops.hpp"
#include "cora/numerics/params.hpp"
#include "cora/numerics/rng.hpp"
#include "cora/numerics/sparse.hpp"

namespace cora::cf {

using data::Interaction;

struct CfModelConfig {
    std::string kind = "mf"; // mf | lightgcn | sasrec
    std::size_t d_c = 8;
    double init_std = 0.02;
    std::uint64_t seed = 0;
    std::size_t lightgcn_layers = 2;
    std::size_t sasrec_max_len = 20;
    std::size_t sasrec_heads = 2;

    void validate() const {
        if (kind != "mf" && kind != "lightgcn" && kind != "sasrec") {
            throw ConfigError("cf: unknown model kind '" + kind + "' (mf, lightgcn, sasrec)");
        }
        if (d_c == 0 || !(init_std > 0.0)) {
            throw ConfigError("cf: d_c and init_std must be positive");
        }
        if (kind == "sasrec" && (sasrec_max_len == 0 || sasrec_heads == 0 || d_c % sasrec_heads != 0)) {
            throw ConfigError("cf: sasrec needs max_len >= 1 and d_c divisible by heads");
        }
    }
};

NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(CfModelConfig, kind, d_c, init_std, seed, lightgcn_layers,
                                                sasrec_max_len, sasrec_heads)

/// A trainable encoder producing e_u and e_i for a batch of interactions.
class CfModel {
public:
    virtual ~CfModel() = default;

    virtual std::string kind() const = 0;
    /// ([B x d_c] users, [B x d_c] items) for the batch.
    virtual std::pair<Var, Var> encode_batch(std::span<const Interaction> batch) const = 0;
    virtual CfEmbeddings export_embeddings(std::uint64_t data_hash = 0) const = 0;

    ParameterSet& params() noexcept { return params_; }
    const ParameterSet& params() const noexcept { return params_; }
    std::size_t user_count() const noexcept { return n_users_; }
    std::size_t item_count() const noexcept { return n_items_; }

    /// sigma(e_u . e_i) per row of the batch, as a [B x 1] Var.
    Var predict(std::span<const Interaction> batch) const {
        const auto [eu, ei] = encode_batch(batch);
        return ops::sigmoid(ops::rowwise_dot(eu, ei));
    }

protected:
    CfModel(std::size_t users, std::size_t items) : n_users_(users), n_items_(items) {}

    void check_ids(std::span<const Interaction> batch) const {
        for (const Interaction& r : batch) {
            if (r.user >= n_users_ || r.item >= n_items_) {
                throw IndexError("cf: interaction (" + std::to_string(r.user) + ", " + std::to_string(r.item) +
                                 ") outside " + std::to_string(n_users_) + " users / " + std::to_string(n_items_) +
                                 " items");
            }
        }
    }

    Var add_param(const std::string& name, Shape shape, Rng& rng, double sd) {
        Var v = Var::parameter(Tensor::randn(std::move(shape), rng, sd));
        params_.add(name, v);
        return v;
    }

    ParameterSet params_;
    std::size_t n_users_ = 0;
    std::size_t n_items_ = 0;
};

class MfModel : public CfModel {
public:
    MfModel(std::size_t users, std::size_t items, const CfModelConfig& cfg) : CfModel(users, items) {
        Rng rng(cfg.seed);
        users_ = add_param("user_emb", {users, cfg.d_c}, rng, cfg.init_std);
        items_ = add_param("item_emb", {items, cfg.d_c}, rng, cfg.init_std);
    }

    std::string kind() const override { return "mf"; }

    /// e_u, e_i as [1 x d_c] rows.
    std::pair<Var, Var> encode(std::size_t u, std::size_t i) const {
        const Interaction r{u, i, 0, 0};
        return encode_batch(std::span<const Interaction>(&r, 1));
    }

    std::pair<Var, Var> encode_batch(std::span<const Interaction> batch) const override {
        check_ids(batch);
        std::vector<std::size_t> us, is;
        for (const Interaction& r : batch) {
            us.push_back(r.user);
            is.push_back(r.item);
        }
        return {ops::gather_rows(users_, us), ops::gather_rows(items_, is)};
    }

    CfEmbeddings export_embeddings(std::uint64_t data_hash = 0) const override {
        return CfEmbeddings(users_.value(), items_.value(), kind(), data_hash);
    }

    Var& user_table() noexcept { return users_; }
    Var& item_table() noexcept { return items_; }

private:
    Var users_, items_;
};

/// Symmetrically normalized user-item adjacency. Users occupy nodes
/// 0..U-1 and items U..U+I-1; positive training interactions are the
/// edges, repeated pairs counted once.
inline SparseMatrix normalized_adjacency(std::size_t users, std::size_t items, std::span<const Interaction> train) {
    std::set<std::pair<std::size_t, std::size_t>> edges;
    for (const Interaction& r : train) {
        if (r.user >= users || r.item >= items) {
            throw IndexError("lightgcn: interaction outside the graph");
        }
        if (r.label == 1) {
            edges.emplace(r.user, r.item);
        }
    }
    const std::size_t n = users + items;
    std::vector<double> degree(n, 0.0);
    for (const auto& [u, i] : edges) {
        degree[u] += 1.0;
        degree[users + i] += 1.0;
    }
    std::vector<SparseMatrix::Entry> entries;
    entries.reserve(2 * edges.size());
    for (const auto& [u, i] : edges) {
        const double w = 1.0 / std::sqrt(degree[u] * degree[users + i]);
        entries.push_back({u, users + i, w});
        entries.push_back({users + i, u, w});
    }
    return SparseMatrix(n, n, std::move(entries));
}

class LightGcnModel : public CfModel {
public:
    LightGcnModel(std::size_t users, std::size_t items, const CfModelConfig& cfg, std::span<const Interaction> train)
        : CfModel(users, items), layers_(cfg.lightgcn_layers), adjacency_(normalized_adjacency(users, items, train)) {
        Rng rng(cfg.seed);
        users_ = add_param("user_emb", {users, cfg.d_c}, rng, cfg.init_std);
        items_ = add_param("item_emb", {items, cfg.d_c}, rng, cfg.init_std);
    }

    std::string kind() const override { return "lightgcn"; }
    const SparseMatrix& adjacency() const noexcept { return adjacency_; }
    std::size_t layers() const noexcept { return layers_; }

    /// mean over k = 0..K of A^k E for a stacked [U+I x d] table E.
    Var propagate(const Var& base) const {
        Var acc = base;
        Var cur = base;
        for (std::size_t k = 0; k < layers_; ++k) {
            cur = ops::spmm(adjacency_, cur);
            acc = ops::add(acc, cur);
        }
        return layers_ == 0 ? acc : ops::scale(acc, 1.0 / static_cast<double>(layers_ + 1));
    }

    Var final_table() const { return propagate(ops::concat_rows({users_, items_})); }

    std::pair<Var, Var> encode_batch(std::span<const Interaction> batch) const override {
        check_ids(batch);
        const Var table = final_table();
        std::vector<std::size_t> us, is;
        for (const Interaction& r : batch) {
            us.push_back(r.user);
            is.push_back(n_users_ + r.item);
        }
        return {ops::gather_rows(table, us), ops::gather_rows(table, is)};
    }

    CfEmbeddings export_embeddings(std::uint64_t data_hash = 0) const override {
        NoGradGuard guard;
        const Tensor t = final_table().value();
        const std::size_t d = t.cols();
        Tensor u({n_users_, d}), i({n_items_, d});
        std::copy(t.data(), t.data() + n_users_ * d, u.data());
        std::copy(t.data() + n_users_ * d, t.data() + t.size(), i.data());
        return CfEmbeddings(std::move(u), std::move(i), kind(), data_hash);
    }

private:
    std::size_t layers_ = 2;
    SparseMatrix adjacency_;
    Var users_, items_;
};

/// One-block causal self-attention encoder over a user's liked items.
class SasRecModel : public CfModel {
public:
    SasRecModel(std::size_t users, std::size_t items, const CfModelConfig& cfg, std::span<const Interaction> train)
        : CfModel(users, items), cfg_(cfg),
          history_(std::vector<std::string>(items), std::vector<Interaction>(train.begin(), train.end())) {
        Rng rng(cfg.seed);
        const std::size_t d = cfg.d_c;
        const double sd = cfg.init_std;
        items_ = add_param("item_emb", {items, d}, rng, sd);
        pos_ = add_param("pos_emb", {cfg.sasrec_max_len, d}, rng, sd);
        auto gain = [&](const std::string& name) {
            Var v = Var::parameter(Tensor({d}, 1.0));
            params_.add(name, v);
            return v;
        };
        const double w_sd = 1.0 / std::sqrt(static_cast<double>(d));
        attn_norm_ = gain("attn_norm");
        wq_ = add_param("wq", {d, d}, rng, w_sd);
        wk_ = add_param("wk", {d, d}, rng, w_sd);
        wv_ = add_param("wv", {d, d}, rng, w_sd);
        wo_ = add_param("wo", {d, d}, rng, w_sd);
        ffn_norm_ = gain("ffn_norm");
        w1_ = add_param("w1", {d, d}, rng, w_sd);
        w2_ = add_param("w2", {d, d}, rng, w_sd);
        final_norm_ = gain("final_norm");
    }

    std::string kind() const override { return "sasrec"; }

    /// Hidden states [L x d] for a history (oldest first, at most max_len items).
    Var hidden_states(std::span<const std::size_t> history, std::vector<Tensor>* attention = nullptr) const {
        const std::size_t L = history.size();
        if (L == 0 || L > cfg_.sasrec_max_len) {
            throw LengthError("sasrec: history length " + std::to_string(L) + " outside 1.." +
                              std::to_string(cfg_.sasrec_max_len));
        }
        for (std::size_t i : history) {
            if (i >= n_items_) {
                throw IndexError("sasrec: item " + std::to_string(i) + " out of range");
            }
        }
        Var x = ops::add(ops::gather_rows(items_, history), ops::slice_rows(pos_, 0, L));
        const Var h = ops::rms_norm(x, attn_norm_);
        const Var q = ops::matmul(h, wq_), k = ops::matmul(h, wk_), v = ops::matmul(h, wv_);
        const std::size_t heads = cfg_.sasrec_heads, dh = cfg_.d_c / heads;
        const double inv = 1.0 / std::sqrt(static_cast<double>(dh));
        std::vector<Var> parts;
        for (std::size_t hd = 0; hd < heads; ++hd) {
            const std::size_t c0 = hd * dh, c1 = c0 + dh;
            const Var w = ops::causal_softmax(
                ops::scale(ops::matmul_nt(ops::slice_cols(q, c0, c1), ops::slice_cols(k, c0, c1)), inv));
            if (attention != nullptr) {
                attention->push_back(w.value());
            }
            parts.push_back(ops::matmul(w, ops::slice_cols(v, c0, c1)));
        }
        x = ops::add(x, ops::matmul(heads == 1 ? parts.front() : ops::concat_cols(parts), wo_));
        const Var f = ops::matmul(ops::silu(ops::matmul(ops::rms_norm(x, ffn_norm_), w1_)), w2_);
        x = ops::add(x, f);
        return ops::rms_norm(x, final_norm_);
    }

    /// Final hidden state, or a zero row for an empty history.
    Var encode_history(std::span<const std::size_t> history) const {
        if (history.empty()) {
            return Var::constant(Tensor({1, cfg_.d_c}, 0.0));
        }
        const std::size_t keep = std::min(history.size(), cfg_.sasrec_max_len);
        const Var hs = hidden_states(history.subspan(history.size() - keep));
        return ops::slice_rows(hs, keep - 1, keep);
    }

    /// Liked training items strictly before `timestamp` (all of them when
    /// timestamp is the maximum value).
    std::vector<std::size_t> history_of(std::size_t user, std::int64_t timestamp) const {
        return history_.liked_before(user, timestamp);
    }

    std::pair<Var, Var> encode_batch(std::span<const Interaction> batch) const override {
        check_ids(batch);
        std::vector<Var> rows;
        std::vector<std::size_t> is;
        for (const Interaction& r : batch) {
            rows.push_back(encode_history(history_of(r.user, r.timestamp)));
            is.push_back(r.item);
        }
        return {ops::concat_rows(rows), ops::gather_rows(items_, is)};
    }

    CfEmbeddings export_embeddings(std::uint64_t data_hash = 0) const override {
        NoGradGuard guard;
        Tensor u({n_users_, cfg_.d_c}, 0.0);
        for (std::size_t user = 0; user < n_users_; ++user) {
            const Tensor e = encode_history(history_of(user, std::numeric_limits<std::int64_t>::max())).value();
            std::copy(e.data(), e.data() + e.size(), u.data() + user * cfg_.d_c);
        }
        return CfEmbeddings(std::move(u), items_.value(), kind(), data_hash);
    }

    Var& item_table() noexcept { return items_; }

private:
    CfModelConfig cfg_;
    data::Catalog history_;
    Var items_, pos_, attn_norm_, wq_, wk_, wv_, wo_, ffn_norm_, w1_, w2_, final_norm_;
};

inline std::unique_ptr<CfModel> make_model(const CfModelConfig& cfg, std::size_t users, std::size_t items,
                                           std::span<const Interaction> train) {
    cfg.validate();
    if (cfg.kind == "mf") {
        return std::make_unique<MfModel>(users, items, cfg);
    }
    if (cfg.kind == "lightgcn") {
        return std::make_unique<LightGcnModel>(users, items, cfg, train);
    }
    return std::make_unique<SasRecModel>(users, items, cfg, train);
}

} // namespace cora::cf
