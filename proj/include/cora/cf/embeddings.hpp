// Copyright (c) 2026, The cora authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <bit>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "cora/data/interactions.hpp"
#include "cora/error.hpp"
#include "cora/numerics/autodiff.hpp"
#include "cora/numerics/checkpoint.hpp"
#include "cora/numerics/ops.hpp"
#include "cora/numerics/tensor.hpp"

namespace cora::cf {

/// FNV-1a over every interaction field; identifies the data a model saw.
inline std::uint64_t fingerprint(const std::vector<data::Interaction>& rows) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    auto mix = [&h](std::uint64_t v) {
        for (int b = 0; b < 8; ++b) {
            h ^= (v >> (8 * b)) & 0xffU;
            h *= 0x100000001b3ULL;
        }
    };
    for (const auto& r : rows) {
        mix(r.user);
        mix(r.item);
        mix(static_cast<std::uint64_t>(r.label));
        mix(std::bit_cast<std::uint64_t>(r.timestamp));
    }
    return h;
}

/// Frozen user and item representations handed to the generator.
class CfEmbeddings {
public:
    CfEmbeddings() = default;

    CfEmbeddings(Tensor users, Tensor items, std::string kind = "mf", std::uint64_t data_hash = 0)
        : kind_(std::move(kind)), data_hash_(data_hash) {
        if (users.rank() != 2 || items.rank() != 2 || users.cols() != items.cols()) {
            throw DimensionError("cf embeddings: user " + shape_string(users.shape()) + " and item " +
                                 shape_string(items.shape()) + " tables must share their width");
        }
        if (!users.all_finite() || !items.all_finite()) {
            throw NumericError("cf embeddings: non-finite entries");
        }
        users_ = Var::constant(std::move(users));
        items_ = Var::constant(std::move(items));
    }

    std::size_t d_c() const { return users_.value().cols(); }
    std::size_t user_count() const { return users_.value().rows(); }
    std::size_t item_count() const { return items_.value().rows(); }
    const std::string& kind() const noexcept { return kind_; }
    std::uint64_t data_hash() const noexcept { return data_hash_; }
    const Tensor& users() const { return users_.value(); }
    const Tensor& items() const { return items_.value(); }

    /// e_u as a constant [1 x d_c] Var.
    Var user(std::size_t u) const {
        if (u >= user_count()) {
            throw IndexError("cf: user " + std::to_string(u) + " out of range (" + std::to_string(user_count()) + ")");
        }
        return Var::constant(Tensor::row(users_.value().row_span(u)));
    }

    Var item(std::size_t i) const {
        if (i >= item_count()) {
            throw IndexError("cf: item " + std::to_string(i) + " out of range (" + std::to_string(item_count()) + ")");
        }
        return Var::constant(Tensor::row(items_.value().row_span(i)));
    }

    /// sigma(e_u . e_i)
    double score(std::size_t u, std::size_t i) const {
        const Var eu = user(u), ei = item(i);
        const auto a = eu.value().values();
        const auto b = ei.value().values();
        double dot = 0.0;
        for (std::size_t k = 0; k < a.size(); ++k) {
            dot += a[k] * b[k];
        }
        return 1.0 / (1.0 + std::exp(-dot));
    }

    std::uint64_t checksum() const {
        ParameterSet p;
        p.add("user_emb", users_);
        p.add("item_emb", items_);
        return p.checksum();
    }

    nlohmann::json sidecar() const {
        return {{"d_c", d_c()}, {"kind", kind_}, {"dataset_hash", data_hash_}, {"users", user_count()},
                {"items", item_count()}};
    }

    /// Writes `<path>` (checkpoint) and `<path>.json` (sidecar).
    void save(const std::string& path) const {
        std::ofstream out(path, std::ios::binary);
        if (!out) {
            throw IoError("cannot open '" + path + "' for writing");
        }
        checkpoint::write(out, {{"user_emb", users_.value()}, {"item_emb", items_.value()}});
        std::ofstream side(path + ".json");
        side << sidecar().dump(2) << '\n';
        if (!out || !side) {
            throw IoError("write failed for '" + path + "'");
        }
    }

    static CfEmbeddings load(const std::string& path) {
        const auto records = checkpoint::load(path);
        if (records.size() != 2 || records[0].name != "user_emb" || records[1].name != "item_emb") {
            throw IoError("'" + path + "' is not a cf embedding checkpoint");
        }
        std::string kind = "unknown";
        std::uint64_t hash = 0;
        std::ifstream side(path + ".json");
        if (side) {
            const auto j = nlohmann::json::parse(side);
            kind = j.value("kind", kind);
            hash = j.value("dataset_hash", hash);
            if (j.value("d_c", records[0].tensor.cols()) != records[0].tensor.cols()) {
                throw IoError("'" + path + "': sidecar d_c disagrees with the tables");
            }
        }
        return CfEmbeddings(records[0].tensor, records[1].tensor, kind, hash);
    }

private:
    Var users_;
    Var items_;
    std::string kind_ = "mf";
    std::uint64_t data_hash_ = 0;
};

} // namespace cora::cf
