// Copyright (c) 2026, The cora authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "cora/error.hpp"
#include "cora/lm/config.hpp"
#include "cora/lm/injectable.hpp"
#include "cora/numerics/autodiff.hpp"
#include "cora/numerics/ops.hpp"
#include "cora/numerics/params.hpp"
#include "cora/numerics/rng.hpp"

namespace cora::generator {

using lm::Delta;
using lm::DeltaSet;
using lm::Target;

enum class Sharing {
    PerType,  // one head per target type, reused by every LM layer
    PerLayer, // one head per (layer, target type)
};

NLOHMANN_JSON_SERIALIZE_ENUM(Sharing, {{Sharing::PerType, "per_type"}, {Sharing::PerLayer, "per_layer"}})

struct GeneratorConfig {
    std::size_t k = 4;
    std::size_t n_blocks = 8;
    std::size_t d_c = 0;
    std::size_t heads = 4;
    std::size_t rank = 16;
    std::string targets = "qkvo";
    Sharing sharing = Sharing::PerType;
    std::size_t ffn_mult = 4;
    // Standard deviation of W_FC entries; 0 picks 1/sqrt(d_g).
    double fc_init_std = 0.0;
    std::uint64_t seed = 0;

    std::size_t d_g() const { return 2 * d_c; }

    void validate() const {
        if (d_c == 0) {
            throw ConfigError("generator: d_c must be positive");
        }
        if (k == 0 || n_blocks == 0 || ffn_mult == 0) {
            throw ConfigError("generator: k, n_blocks and ffn_mult must be positive");
        }
        if (heads == 0 || d_g() % heads != 0) {
            throw ConfigError("generator: d_g = " + std::to_string(d_g()) + " is not divisible by heads = " +
                              std::to_string(heads));
        }
        if (rank == 0) {
            throw ConfigError("generator: rank must be >= 1");
        }
        lm::parse_targets(targets);
    }

    friend bool operator==(const GeneratorConfig&, const GeneratorConfig&) = default;
};

NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(GeneratorConfig, k, n_blocks, d_c, heads, rank, targets, sharing,
                                                ffn_mult, fc_init_std, seed)

/// Maps q_c to one (A, B) pair for a host weight of shape [d_in x d_out].
struct DeltaHead {
    std::size_t d_in = 0;
    std::size_t d_out = 0;
    std::size_t rank = 0;
    Var fc;   // [d_g x d_in*r]
    Var proj; // [r x d_out], zero at construction
};

/// A = q_c W_FC reshaped row-major to [d_in x r]; B = W_proj.
inline Delta make_delta(const Var& q_c, const DeltaHead& head) {
    if (q_c.value().size() != head.fc.value().rows()) {
        throw DimensionError("make_delta: q_c has " + std::to_string(q_c.value().size()) + " entries, head expects " +
                             std::to_string(head.fc.value().rows()));
    }
    return {ops::reshape(ops::matmul(q_c, head.fc), {head.d_in, head.rank}), head.proj};
}

class Generator {
public:
    struct Block {
        Var sa_norm, sa_wq, sa_wk, sa_wv, sa_wo;
        Var ca_norm, mem_norm, ca_wq, ca_wk, ca_wv, ca_wo;
        Var ffn_norm, w1, b1, w2, b2;
    };

    Generator() = default;

    Generator(const GeneratorConfig& cfg, const lm::LmConfig& host) : cfg_(cfg), host_(host) {
        cfg_.validate();
        host_.validate();
        targets_ = lm::parse_targets(cfg_.targets);
        Rng rng(cfg_.seed);
        const std::size_t dg = cfg_.d_g(), dc = cfg_.d_c, dff = cfg_.ffn_mult * dg;
        const double in_std = 1.0 / std::sqrt(static_cast<double>(dg));
        const double out_std = in_std / std::sqrt(2.0 * static_cast<double>(cfg_.n_blocks));
        auto param = [&](const std::string& name, Shape shape, double sd) {
            Var v = Var::parameter(Tensor::randn(std::move(shape), rng, sd));
            params_.add(name, v);
            return v;
        };
        auto filled = [&](const std::string& name, Shape shape, double value) {
            Var v = Var::parameter(Tensor(std::move(shape), value));
            params_.add(name, v);
            return v;
        };
        queries_ = param("queries", {cfg_.k, dg}, 1.0);
        user_lift_ = param("user_lift", {dc, dg}, 1.0 / std::sqrt(static_cast<double>(dc)));
        item_lift_ = param("item_lift", {dc, dg}, 1.0 / std::sqrt(static_cast<double>(dc)));
        for (std::size_t n = 0; n < cfg_.n_blocks; ++n) {
            const std::string p = "block" + std::to_string(n) + ".";
            Block b;
            b.sa_norm = filled(p + "sa_norm", {dg}, 1.0);
            b.sa_wq = param(p + "sa_wq", {dg, dg}, in_std);
            b.sa_wk = param(p + "sa_wk", {dg, dg}, in_std);
            b.sa_wv = param(p + "sa_wv", {dg, dg}, in_std);
            b.sa_wo = param(p + "sa_wo", {dg, dg}, out_std);
            b.ca_norm = filled(p + "ca_norm", {dg}, 1.0);
            b.mem_norm = filled(p + "mem_norm", {dg}, 1.0);
            b.ca_wq = param(p + "ca_wq", {dg, dg}, in_std);
            b.ca_wk = param(p + "ca_wk", {dg, dg}, in_std);
            b.ca_wv = param(p + "ca_wv", {dg, dg}, in_std);
            b.ca_wo = param(p + "ca_wo", {dg, dg}, out_std);
            b.ffn_norm = filled(p + "ffn_norm", {dg}, 1.0);
            b.w1 = param(p + "w1", {dg, dff}, in_std);
            b.b1 = filled(p + "b1", {dff}, 0.0);
            b.w2 = param(p + "w2", {dff, dg}, 1.0 / std::sqrt(static_cast<double>(dff)) /
                                                  std::sqrt(2.0 * static_cast<double>(cfg_.n_blocks)));
            b.b2 = filled(p + "b2", {dg}, 0.0);
            blocks_.push_back(std::move(b));
        }
        const double fc_std = cfg_.fc_init_std > 0.0 ? cfg_.fc_init_std : in_std;
        const std::size_t head_layers = cfg_.sharing == Sharing::PerType ? 1 : host_.n_layers;
        for (std::size_t l = 0; l < head_layers; ++l) {
            for (Target t : targets_) {
                const auto [din, dout] = lm::target_shape(t, host_);
                const std::string p = (cfg_.sharing == Sharing::PerType ? std::string("head.")
                                                                         : "head" + std::to_string(l) + ".") +
                                      lm::target_name(t) + ".";
                DeltaHead h{din, dout, cfg_.rank, {}, {}};
                h.fc = param(p + "fc", {dg, din * cfg_.rank}, fc_std);
                h.proj = filled(p + "proj", {cfg_.rank, dout}, 0.0);
                heads_.push_back(std::move(h));
            }
        }
    }

    const GeneratorConfig& config() const noexcept { return cfg_; }
    const lm::LmConfig& host_config() const noexcept { return host_; }
    ParameterSet& params() noexcept { return params_; }
    const ParameterSet& params() const noexcept { return params_; }
    const std::vector<Target>& targets() const noexcept { return targets_; }
    const std::vector<DeltaHead>& heads() const noexcept { return heads_; }

    const DeltaHead& head(std::size_t layer, Target t) const {
        const std::size_t per_layer = targets_.size();
        for (std::size_t j = 0; j < per_layer; ++j) {
            if (targets_[j] == t) {
                return heads_.at((cfg_.sharing == Sharing::PerType ? 0 : layer) * per_layer + j);
            }
        }
        throw ConfigError(std::string("generator: target ") + lm::target_name(t) + " is not generated");
    }

    /// The two memory tokens [e_u W_user; e_i W_item], shape [2 x d_g].
    Var memory(const Var& e_u, const Var& e_i) const {
        check_embedding(e_u, "e_u");
        check_embedding(e_i, "e_i");
        return ops::concat_rows({ops::matmul(e_u, user_lift_), ops::matmul(e_i, item_lift_)});
    }

    /// The k refined queries for a given memory, shape [k x d_g].
    Var refine(const Var& mem) const {
        Var x = queries_;
        for (const Block& b : blocks_) {
            const Var h = ops::rms_norm(x, b.sa_norm);
            x = ops::add(x, attention(h, h, b.sa_wq, b.sa_wk, b.sa_wv, b.sa_wo));
            const Var hq = ops::rms_norm(x, b.ca_norm);
            const Var hm = ops::rms_norm(mem, b.mem_norm);
            x = ops::add(x, attention(hq, hm, b.ca_wq, b.ca_wk, b.ca_wv, b.ca_wo));
            const Var hf = ops::rms_norm(x, b.ffn_norm);
            const Var mid = ops::silu(ops::add_bias(ops::matmul(hf, b.w1), b.b1));
            x = ops::add(x, ops::add_bias(ops::matmul(mid, b.w2), b.b2));
        }
        return x;
    }

    /// q_c = mean over the refined queries, shape [1 x d_g].
    Var forward(const Var& e_u, const Var& e_i) const { return ops::mean_rows(refine(memory(e_u, e_i))); }

    /// Runs the query network once and fills every (layer, target) slot.
    DeltaSet generate(const Var& e_u, const Var& e_i) const { return deltas_from(forward(e_u, e_i)); }

    DeltaSet deltas_from(const Var& q_c) const {
        DeltaSet out(host_.n_layers);
        if (cfg_.sharing == Sharing::PerType) {
            for (std::size_t j = 0; j < targets_.size(); ++j) {
                const Delta d = make_delta(q_c, heads_[j]);
                for (std::size_t l = 0; l < host_.n_layers; ++l) {
                    out.set(l, targets_[j], d);
                }
            }
        } else {
            for (std::size_t l = 0; l < host_.n_layers; ++l) {
                for (std::size_t j = 0; j < targets_.size(); ++j) {
                    out.set(l, targets_[j], make_delta(q_c, heads_[l * targets_.size() + j]));
                }
            }
        }
        return out;
    }

private:
    void check_embedding(const Var& e, const char* what) const {
        if (e.value().size() != cfg_.d_c || e.value().rows() != 1) {
            throw ConfigError(std::string("generator: ") + what + " has shape " + shape_string(e.shape()) +
                              ", expected a row of length d_c = " + std::to_string(cfg_.d_c));
        }
    }

    // Unmasked multi-head attention of query rows over memory rows.
    Var attention(const Var& xq, const Var& xm, const Var& wq, const Var& wk, const Var& wv, const Var& wo) const {
        const Var q = ops::matmul(xq, wq);
        const Var k = ops::matmul(xm, wk);
        const Var v = ops::matmul(xm, wv);
        const std::size_t dh = cfg_.d_g() / cfg_.heads;
        const double inv = 1.0 / std::sqrt(static_cast<double>(dh));
        std::vector<Var> parts;
        parts.reserve(cfg_.heads);
        for (std::size_t h = 0; h < cfg_.heads; ++h) {
            const std::size_t c0 = h * dh, c1 = c0 + dh;
            const Var qh = cfg_.heads == 1 ? q : ops::slice_cols(q, c0, c1);
            const Var kh = cfg_.heads == 1 ? k : ops::slice_cols(k, c0, c1);
            const Var vh = cfg_.heads == 1 ? v : ops::slice_cols(v, c0, c1);
            parts.push_back(ops::matmul(ops::softmax(ops::scale(ops::matmul_nt(qh, kh), inv)), vh));
        }
        return ops::matmul(parts.size() == 1 ? parts.front() : ops::concat_cols(parts), wo);
    }

    GeneratorConfig cfg_;
    lm::LmConfig host_;
    std::vector<Target> targets_;
    ParameterSet params_;
    Var queries_, user_lift_, item_lift_;
    std::vector<Block> blocks_;
    std::vector<DeltaHead> heads_;
};

} // namespace cora::generator
