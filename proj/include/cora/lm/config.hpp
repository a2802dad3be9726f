// Copyright (c) 2026, The cora authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "cora/error.hpp"

namespace cora::lm {

struct LmConfig {
    std::size_t vocab_size = 0;
    std::size_t d_model = 128;
    std::size_t n_heads = 4;
    std::size_t n_layers = 4;
    std::size_t d_ff = 512;
    std::size_t max_len = 256;
    double norm_eps = 1e-6;

    std::size_t d_head() const { return d_model / n_heads; }

    void validate() const {
        if (vocab_size < 4) {
            throw ConfigError("lm: vocabulary must hold the four reserved tokens");
        }
        if (d_model == 0 || n_heads == 0 || d_model % n_heads != 0) {
            throw ConfigError("lm: d_model must be a positive multiple of n_heads");
        }
        if (d_ff < d_model) {
            throw ConfigError("lm: d_ff must be >= d_model");
        }
        if (n_layers == 0 || max_len == 0) {
            throw ConfigError("lm: n_layers and max_len must be positive");
        }
    }

    friend bool operator==(const LmConfig&, const LmConfig&) = default;
};

NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(LmConfig, vocab_size, d_model, n_heads, n_layers, d_ff, max_len,
                                                norm_eps)

/// The six linear weights of a decoder block that can carry a delta.
enum class Target : std::size_t { Q = 0, K, V, O, Up, Down };

inline constexpr std::size_t kTargetCount = 6;
inline constexpr std::array<Target, kTargetCount> kAllTargets = {Target::Q, Target::K,  Target::V,
                                                                 Target::O, Target::Up, Target::Down};

inline const char* target_name(Target t) {
    static constexpr std::array<const char*, kTargetCount> names = {"q", "k", "v", "o", "up", "down"};
    return names[static_cast<std::size_t>(t)];
}

/// (d_in, d_out) of a target weight.
inline std::pair<std::size_t, std::size_t> target_shape(Target t, const LmConfig& cfg) {
    switch (t) {
    case Target::Up:
        return {cfg.d_model, cfg.d_ff};
    case Target::Down:
        return {cfg.d_ff, cfg.d_model};
    default:
        return {cfg.d_model, cfg.d_model};
    }
}

/// Parses a target-set code such as "qkvo". The letter f stands for the
/// FFN pair (up, down). Order in the result follows kAllTargets.
inline std::vector<Target> parse_targets(const std::string& code) {
    std::array<bool, kTargetCount> on{};
    if (code.empty()) {
        throw ConfigError("targets: empty target set");
    }
    for (char c : code) {
        switch (c) {
        case 'q': on[0] = true; break;
        case 'k': on[1] = true; break;
        case 'v': on[2] = true; break;
        case 'o': on[3] = true; break;
        case 'f': on[4] = on[5] = true; break;
        default:
            throw ConfigError(std::string("targets: unknown letter '") + c + "' (expected q, k, v, o, f)");
        }
    }
    std::vector<Target> out;
    for (Target t : kAllTargets) {
        if (on[static_cast<std::size_t>(t)]) {
            out.push_back(t);
        }
    }
    return out;
}

inline std::string targets_code(const std::vector<Target>& targets) {
    std::array<bool, kTargetCount> on{};
    for (Target t : targets) {
        on[static_cast<std::size_t>(t)] = true;
    }
    std::string code;
    for (std::size_t i = 0; i < 4; ++i) {
        if (on[i]) {
            code += "qkvo"[i];
        }
    }
    if (on[4] || on[5]) {
        code += 'f';
    }
    return code;
}

} // namespace cora::lm
