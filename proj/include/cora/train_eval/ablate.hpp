// Copyright (c) 2026, The cora authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <fmt/format.h>
#include <json.hpp>

#include "cora/train_eval/experiment.hpp"

namespace cora::train_eval {

/// Published AUC/UAUC for the MF-backed model per target set, on the two
/// public benchmarks. Only for side-by-side display.
struct ReferenceRow {
    const char* targets;
    double book_auc, book_uauc, ml_auc, ml_uauc;
};

inline const std::vector<ReferenceRow>& reference_rows() {
    static const std::vector<ReferenceRow> rows = {
        {"qkvof", 0.8141, 0.6068, 0.7312, 0.6801}, {"qkvo", 0.8179, 0.6262, 0.7361, 0.6884},
        {"qkv", 0.7741, 0.5747, 0.6947, 0.5933},   {"qko", 0.8091, 0.5949, 0.7111, 0.5973},
        {"qk", 0.7685, 0.5644, 0.6784, 0.5887},
    };
    return rows;
}

inline std::optional<ReferenceRow> reference_for(const std::string& name) {
    for (const auto& r : reference_rows()) {
        if (name == r.targets) {
            return r;
        }
    }
    return std::nullopt;
}

inline const std::vector<std::string>& default_target_sets() {
    static const std::vector<std::string> sets = {"qkvof", "qkvo", "qkv", "qko", "qk"};
    return sets;
}

/// Target-set rows in display order, then the two input ablations.
inline std::vector<VariantSpec> ablation_variants(const std::vector<std::string>& target_sets,
                                                  const std::string& id_only_targets = "qkvo") {
    std::vector<VariantSpec> v;
    for (const auto& t : target_sets) {
        v.push_back({t, InputMode::Combined, t});
    }
    v.push_back({"text_only", InputMode::TextOnly, ""});
    v.push_back({"id_only", InputMode::IdOnly, id_only_targets});
    return v;
}

struct Summary {
    std::size_t n = 0;
    double mean = 0.0;
    double std = 0.0; // sample standard deviation; 0 when n < 2
};

inline Summary summarize(const std::vector<double>& xs) {
    Summary s;
    s.n = xs.size();
    if (s.n == 0) {
        return s;
    }
    for (double x : xs) {
        s.mean += x;
    }
    s.mean /= static_cast<double>(s.n);
    if (s.n > 1) {
        double ss = 0.0;
        for (double x : xs) {
            ss += (x - s.mean) * (x - s.mean);
        }
        s.std = std::sqrt(ss / static_cast<double>(s.n - 1));
    }
    return s;
}

struct AblationRow {
    std::string variant;
    Summary auc;
    Summary uauc;
    Summary valid_auc;
};

struct AblationResult {
    std::vector<VariantResult> runs;
    std::vector<AblationRow> rows;
};

inline std::vector<AblationRow> summarize_runs(const std::vector<VariantSpec>& specs,
                                               const std::vector<VariantResult>& runs) {
    std::vector<AblationRow> rows;
    for (const auto& spec : specs) {
        std::vector<double> a, u, v;
        for (const auto& r : runs) {
            if (r.name != spec.name) {
                continue;
            }
            if (r.test.all.auc) {
                a.push_back(*r.test.all.auc);
            }
            if (r.test.all.uauc) {
                u.push_back(*r.test.all.uauc);
            }
            v.push_back(r.valid_auc);
        }
        rows.push_back({spec.name, summarize(a), summarize(u), summarize(v)});
    }
    return rows;
}

inline AblationResult run_ablation(const Stage& st, const ExperimentConfig& cfg, const std::vector<VariantSpec>& specs,
                                   const std::function<void(const VariantResult&)>& on_run = {}) {
    AblationResult out;
    for (const auto& spec : specs) {
        for (std::uint64_t seed : cfg.seeds) {
            out.runs.push_back(run_variant(st, cfg, spec, seed));
            if (on_run) {
                on_run(out.runs.back());
            }
        }
    }
    out.rows = summarize_runs(specs, out.runs);
    return out;
}

inline std::string format_optional(const std::optional<double>& v) { return v ? fmt::format("{:.6f}", *v) : ""; }

/// Long-format CSV: one line per variant, seed and split. Undefined
/// metrics are left blank.
inline void write_ablation_csv(std::ostream& out, const std::vector<VariantResult>& runs) {
    out << "variant,auc,uauc,seed,split\n";
    for (const auto& r : runs) {
        for (const auto& [split, m] : {std::pair{"valid", &r.valid}, std::pair{"test", &r.test}}) {
            out << r.name << ',' << format_optional(m->all.auc) << ',' << format_optional(m->all.uauc) << ','
                << r.seed << ',' << split << '\n';
        }
    }
}

inline std::string format_summary(const Summary& s) {
    return s.n == 0 ? "n/a" : fmt::format("{:.4f} ± {:.4f}", s.mean, s.std);
}

/// Markdown table: one row per variant with test AUC/UAUC over seeds and the
/// published numbers for the same target set where they exist.
inline void write_ablation_table(std::ostream& out, const std::vector<AblationRow>& rows) {
    out << "| variant | AUC (mean ± std) | UAUC (mean ± std) | seeds | ref AUC Amazon-Book | ref UAUC Amazon-Book | "
           "ref AUC ML-1M | ref UAUC ML-1M |\n";
    out << "|---|---|---|---|---|---|---|---|\n";
    for (const auto& r : rows) {
        const auto ref = reference_for(r.variant);
        out << "| " << r.variant << " | " << format_summary(r.auc) << " | " << format_summary(r.uauc) << " | "
            << r.auc.n << " | ";
        if (ref) {
            out << fmt::format("{:.4f} | {:.4f} | {:.4f} | {:.4f} |\n", ref->book_auc, ref->book_uauc, ref->ml_auc,
                               ref->ml_uauc);
        } else {
            out << "- | - | - | - |\n";
        }
    }
}

inline void to_json(nlohmann::json& j, const Summary& s) { j = {{"n", s.n}, {"mean", s.mean}, {"std", s.std}}; }

inline void to_json(nlohmann::json& j, const AblationRow& r) {
    j = {{"variant", r.variant}, {"auc", r.auc}, {"uauc", r.uauc}, {"valid_auc", r.valid_auc}};
}

} // namespace cora::train_eval
