// Copyright (c) 2026, The cora authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "cora/data/tokenizer.hpp"
#include "cora/error.hpp"
#include "cora/lm/config.hpp"
#include "cora/lm/injectable.hpp"
#include "cora/numerics/autodiff.hpp"
#include "cora/numerics/ops.hpp"
#include "cora/numerics/params.hpp"
#include "cora/numerics/rng.hpp"

namespace cora::lm {

using data::TokenId;

struct ForwardOptions {
    // Compute only the final position in the last block. Scores need nothing else.
    bool last_position_only = false;
    // When set, receives one [L x L] attention matrix per (layer, head).
    std::vector<Tensor>* attention = nullptr;
};

/// Decoder-only transformer with pre-norm blocks, learned positions and an
/// output projection tied to the token embedding table.
class LanguageModel {
public:
    struct Block {
        Var attn_norm, wq, wk, wv, wo;
        Var ffn_norm, w_up, w_down;

        const Var& weight(Target t) const {
            switch (t) {
            case Target::Q: return wq;
            case Target::K: return wk;
            case Target::V: return wv;
            case Target::O: return wo;
            case Target::Up: return w_up;
            case Target::Down: return w_down;
            }
            return wq;
        }
    };

    LanguageModel() = default;

    LanguageModel(const LmConfig& cfg, std::uint64_t seed, double init_std = 0.02) : cfg_(cfg) {
        cfg_.validate();
        Rng rng(seed);
        auto param = [&](const std::string& name, Shape shape) {
            Var v = Var::parameter(Tensor::randn(std::move(shape), rng, init_std));
            params_.add(name, v);
            return v;
        };
        auto gain = [&](const std::string& name) {
            Var v = Var::parameter(Tensor({cfg_.d_model}, 1.0));
            params_.add(name, v);
            return v;
        };
        tok_emb_ = param("tok_emb", {cfg_.vocab_size, cfg_.d_model});
        pos_emb_ = param("pos_emb", {cfg_.max_len, cfg_.d_model});
        for (std::size_t l = 0; l < cfg_.n_layers; ++l) {
            const std::string p = "layer" + std::to_string(l) + ".";
            Block b;
            b.attn_norm = gain(p + "attn_norm");
            b.wq = param(p + "wq", {cfg_.d_model, cfg_.d_model});
            b.wk = param(p + "wk", {cfg_.d_model, cfg_.d_model});
            b.wv = param(p + "wv", {cfg_.d_model, cfg_.d_model});
            b.wo = param(p + "wo", {cfg_.d_model, cfg_.d_model});
            b.ffn_norm = gain(p + "ffn_norm");
            b.w_up = param(p + "w_up", {cfg_.d_model, cfg_.d_ff});
            b.w_down = param(p + "w_down", {cfg_.d_ff, cfg_.d_model});
            blocks_.push_back(std::move(b));
        }
        final_norm_ = gain("final_norm");
    }

    const LmConfig& config() const noexcept { return cfg_; }
    ParameterSet& params() noexcept { return params_; }
    const ParameterSet& params() const noexcept { return params_; }
    const Block& block(std::size_t l) const { return blocks_.at(l); }
    const Var& token_embedding() const noexcept { return tok_emb_; }

    void freeze() { params_.set_requires_grad(false); }
    void unfreeze() { params_.set_requires_grad(true); }

    void check_ids(std::span<const TokenId> ids) const {
        if (ids.empty()) {
            throw ValidationError("lm: empty token sequence");
        }
        if (ids.size() > cfg_.max_len) {
            throw LengthError("lm: sequence of " + std::to_string(ids.size()) + " tokens exceeds max_len " +
                              std::to_string(cfg_.max_len));
        }
        for (TokenId id : ids) {
            if (id < 0 || static_cast<std::size_t>(id) >= cfg_.vocab_size) {
                throw IndexError("lm: token id " + std::to_string(id) + " outside vocabulary");
            }
        }
    }

    /// Logits [L x vocab], or [1 x vocab] for the final position when
    /// `last_position_only` is set.
    Var forward(std::span<const TokenId> ids, const DeltaSet* deltas = nullptr, const ForwardOptions& opt = {}) const {
        check_ids(ids);
        if (deltas != nullptr && !deltas->empty() && deltas->layers() != cfg_.n_layers) {
            throw InjectionError("lm: delta set covers " + std::to_string(deltas->layers()) + " layers, model has " +
                                 std::to_string(cfg_.n_layers));
        }
        const std::size_t L = ids.size();
        std::vector<std::size_t> rows(ids.begin(), ids.end());
        Var x = ops::add(ops::gather_rows(tok_emb_, rows), ops::slice_rows(pos_emb_, 0, L));
        auto delta = [&](std::size_t l, Target t) { return deltas == nullptr ? nullptr : deltas->get(l, t); };

        for (std::size_t l = 0; l < cfg_.n_layers; ++l) {
            const Block& b = blocks_[l];
            const bool last_only = opt.last_position_only && l + 1 == cfg_.n_layers;
            const Var h = ops::rms_norm(x, b.attn_norm, cfg_.norm_eps);
            const Var q_in = last_only ? ops::slice_rows(h, L - 1, L) : h;
            const Var q = injectable_forward(q_in, b.wq, delta(l, Target::Q));
            const Var k = injectable_forward(h, b.wk, delta(l, Target::K));
            const Var v = injectable_forward(h, b.wv, delta(l, Target::V));
            const Var mixed = attend(q, k, v, last_only ? L - 1 : 0, opt.attention);
            const Var attn = injectable_forward(mixed, b.wo, delta(l, Target::O));
            x = ops::add(last_only ? ops::slice_rows(x, L - 1, L) : x, attn);
            const Var h2 = ops::rms_norm(x, b.ffn_norm, cfg_.norm_eps);
            const Var up = ops::silu(injectable_forward(h2, b.w_up, delta(l, Target::Up)));
            x = ops::add(x, injectable_forward(up, b.w_down, delta(l, Target::Down)));
        }
        return ops::matmul_nt(ops::rms_norm(x, final_norm_, cfg_.norm_eps), tok_emb_);
    }

    /// sigma(logit_yes - logit_no) at the final position, as a [1 x 1] Var.
    Var score(std::span<const TokenId> ids, const DeltaSet* deltas = nullptr) const {
        const Var logits = forward(ids, deltas, {.last_position_only = true});
        return yes_probability(logits, logits.value().rows() - 1);
    }

    double score_value(std::span<const TokenId> ids, const DeltaSet* deltas = nullptr) const {
        NoGradGuard guard;
        return score(ids, deltas).value()[0];
    }

    static Var yes_probability(const Var& logits, std::size_t row) {
        const Var gap = ops::sub(ops::select(logits, row, static_cast<std::size_t>(data::kYesId)),
                                 ops::select(logits, row, static_cast<std::size_t>(data::kNoId)));
        return ops::sigmoid(gap);
    }

    /// Writes per-position logits as CSV: position,token,<one column per vocab id>.
    void dump_logits(std::ostream& out, std::span<const TokenId> ids, const DeltaSet* deltas = nullptr) const {
        NoGradGuard guard;
        const Tensor logits = forward(ids, deltas).value();
        out << "position,token";
        for (std::size_t j = 0; j < cfg_.vocab_size; ++j) {
            out << ",v" << j;
        }
        out << '\n';
        out.precision(17);
        for (std::size_t i = 0; i < logits.rows(); ++i) {
            out << i << ',' << ids[i];
            for (std::size_t j = 0; j < logits.cols(); ++j) {
                out << ',' << logits(i, j);
            }
            out << '\n';
        }
    }

private:
    // Multi-head causal attention. q has rows offset..offset+m-1 of the sequence.
    Var attend(const Var& q, const Var& k, const Var& v, std::size_t offset, std::vector<Tensor>* capture) const {
        const std::size_t dh = cfg_.d_head();
        const double inv = 1.0 / std::sqrt(static_cast<double>(dh));
        std::vector<Var> heads;
        heads.reserve(cfg_.n_heads);
        for (std::size_t h = 0; h < cfg_.n_heads; ++h) {
            const std::size_t c0 = h * dh, c1 = c0 + dh;
            const Var qh = cfg_.n_heads == 1 ? q : ops::slice_cols(q, c0, c1);
            const Var kh = cfg_.n_heads == 1 ? k : ops::slice_cols(k, c0, c1);
            const Var vh = cfg_.n_heads == 1 ? v : ops::slice_cols(v, c0, c1);
            const Var weights = ops::causal_softmax(ops::scale(ops::matmul_nt(qh, kh), inv), offset);
            if (capture != nullptr) {
                capture->push_back(weights.value());
            }
            heads.push_back(ops::matmul(weights, vh));
        }
        return heads.size() == 1 ? heads.front() : ops::concat_cols(heads);
    }

    LmConfig cfg_;
    ParameterSet params_;
    Var tok_emb_, pos_emb_, final_norm_;
    std::vector<Block> blocks_;
};

} // namespace cora::lm
