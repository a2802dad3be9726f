// Copyright (c) 2026, The cora authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <string>
#include <utility>
#include <vector>

#include "cora/error.hpp"
#include "cora/numerics/autodiff.hpp"

namespace cora {

struct NamedParam {
    std::string name;
    Var var;
};

/// Ordered, named view over a model's parameters. Copies share the
/// underlying nodes; use snapshot()/restore() to copy values.
class ParameterSet {
public:
    void add(std::string name, Var var) {
        for (const NamedParam& p : params_) {
            if (p.name == name) {
                throw ConfigError("parameter '" + name + "' registered twice");
            }
        }
        params_.push_back({std::move(name), std::move(var)});
    }

    void extend(const ParameterSet& other, const std::string& prefix = "") {
        for (const NamedParam& p : other.params_) {
            add(prefix + p.name, p.var);
        }
    }

    std::size_t size() const noexcept { return params_.size(); }
    auto begin() const noexcept { return params_.begin(); }
    auto end() const noexcept { return params_.end(); }
    const NamedParam& operator[](std::size_t i) const { return params_[i]; }

    std::vector<Var> vars() const {
        std::vector<Var> out;
        out.reserve(params_.size());
        for (const NamedParam& p : params_) {
            out.push_back(p.var);
        }
        return out;
    }

    const Var& find(const std::string& name) const {
        for (const NamedParam& p : params_) {
            if (p.name == name) {
                return p.var;
            }
        }
        throw IndexError("no parameter named '" + name + "'");
    }

    std::size_t scalar_count() const {
        std::size_t n = 0;
        for (const NamedParam& p : params_) {
            n += p.var.value().size();
        }
        return n;
    }

    void zero_grad() {
        for (NamedParam& p : params_) {
            p.var.zero_grad();
        }
    }

    void set_requires_grad(bool flag) {
        for (NamedParam& p : params_) {
            p.var.set_requires_grad(flag);
        }
    }

    std::vector<Tensor> snapshot() const {
        std::vector<Tensor> out;
        out.reserve(params_.size());
        for (const NamedParam& p : params_) {
            out.push_back(p.var.value());
        }
        return out;
    }

    void restore(const std::vector<Tensor>& values) {
        if (values.size() != params_.size()) {
            throw DimensionError("restore: snapshot has " + std::to_string(values.size()) + " tensors for " +
                                 std::to_string(params_.size()) + " parameters");
        }
        for (std::size_t i = 0; i < values.size(); ++i) {
            if (values[i].shape() != params_[i].var.shape()) {
                throw DimensionError("restore: shape mismatch for '" + params_[i].name + "'");
            }
            params_[i].var.mutable_value() = values[i];
        }
    }

    /// FNV-1a over names, shapes and the bit patterns of all values.
    std::uint64_t checksum() const {
        std::uint64_t h = 0xcbf29ce484222325ULL;
        auto mix = [&h](const void* data, std::size_t n) {
            const auto* bytes = static_cast<const unsigned char*>(data);
            for (std::size_t i = 0; i < n; ++i) {
                h ^= bytes[i];
                h *= 0x100000001b3ULL;
            }
        };
        for (const NamedParam& p : params_) {
            mix(p.name.data(), p.name.size());
            for (std::size_t e : p.var.shape()) {
                const auto e64 = static_cast<std::uint64_t>(e);
                mix(&e64, sizeof e64);
            }
            for (double v : p.var.value().values()) {
                const auto bits = std::bit_cast<std::uint64_t>(v);
                mix(&bits, sizeof bits);
            }
        }
        return h;
    }

private:
    std::vector<NamedParam> params_;
};

} // namespace cora
