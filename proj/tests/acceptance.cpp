// Copyright (c) 2026, The cora authors
// SPDX-License-Identifier: Apache-2.0
//
// Acceptance suite. Prints one PASS/FAIL line per criterion and exits
// nonzero if any criterion fails. Pass criterion numbers as arguments to run
// a subset.

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <fmt/format.h>
#include <unistd.h>

#include "cora/cli/cli.hpp"
#include "support/oracles.hpp"

using namespace cora;
namespace fs = std::filesystem;
namespace t = cora::testing;

namespace {

using Clock = std::chrono::steady_clock;

std::vector<std::string> operator+(std::vector<std::string> a, const std::vector<std::string>& b) {
    a.insert(a.end(), b.begin(), b.end());
    return a;
}

double seconds_since(Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}

struct Outcome {
    bool pass = false;
    std::string detail;
};

int cli_run(std::vector<std::string> args, std::string* out = nullptr) {
    args.insert(args.begin(), "cora");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    std::ostringstream o, e;
    const int code = cli::run(static_cast<int>(argv.size()), argv.data(), o, e);
    if (out != nullptr) *out = o.str();
    if (code != 0) std::fprintf(stderr, "  cora %s -> %d: %s", args[1].c_str(), code, e.str().c_str());
    return code;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), {}};
}

const std::string kDesk = CORA_SOURCE_DIR "/configs/desk.json";

// Shared scratch space with CLI-produced artifacts on the desk config.
struct Workspace {
    fs::path dir;
    bool ready = false;

    void prepare() {
        if (ready) return;
        dir = fs::temp_directory_path() / ("cora_acceptance_" + std::to_string(::getpid()));
        fs::remove_all(dir);
        fs::create_directories(dir);
        const std::string d = (dir / "data").string();
        if (cli_run({"gen-data", "--config", kDesk, "--out", d}) != 0 ||
            cli_run({"train-cf", "--config", kDesk, "--data", d, "--out", (dir / "cf").string()}) != 0 ||
            cli_run({"pretrain-lm", "--config", kDesk, "--data", d, "--out", (dir / "lm").string()}) != 0) {
            throw std::runtime_error("could not build the acceptance artifacts");
        }
        ready = true;
    }

    std::vector<std::string> train_args(const std::string& out) const {
        return {"train-cora", "--config", kDesk, "--data", (dir / "data").string(), "--cf-emb",
                (dir / "cf" / "cf_emb.ckpt").string(), "--lm", (dir / "lm").string(), "--out", (dir / out).string()};
    }

    ~Workspace() {
        if (!dir.empty()) fs::remove_all(dir);
    }
};

Workspace workspace;
double c5_seconds = 0.0;
std::vector<std::pair<std::uint64_t, std::uint64_t>> c5_checksums; // (before, after) per run, LM then CF

// 1 ------------------------------------------------------------------------
Outcome zero_init_neutrality() {
    const lm::LmConfig lc{.vocab_size = 60, .d_model = 32, .n_heads = 4, .n_layers = 2, .d_ff = 64, .max_len = 48};
    lm::LanguageModel model(lc, 1, 0.2);
    model.freeze();
    Rng rng(2024);
    const cf::CfEmbeddings emb(Tensor::randn({20, 8}, rng), Tensor::randn({20, 8}, rng));
    const generator::Generator gen({.d_c = 8, .targets = "qkvof", .seed = 5}, lc);
    std::size_t identical = 0;
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<data::TokenId> ids(1 + rng.below(lc.max_len));
        for (auto& id : ids) id = static_cast<data::TokenId>(rng.below(lc.vocab_size));
        NoGradGuard guard;
        const lm::DeltaSet ds = gen.generate(emb.user(rng.below(20)), emb.item(rng.below(20)));
        identical += model.forward(ids, &ds).value() == model.forward(ids).value();
    }
    return {identical == 100, fmt::format("{}/100 prompts bit-identical", identical)};
}

// 2 ------------------------------------------------------------------------
Outcome merge_bypass() {
    Rng rng(77);
    double worst = 0.0;
    for (int trial = 0; trial < 1000; ++trial) {
        const std::size_t n = 1 + rng.below(8), din = 1 + rng.below(8), dout = 1 + rng.below(8), r = 1 + rng.below(8);
        const Tensor x = Tensor::randn({n, din}, rng), w = Tensor::randn({din, dout}, rng);
        const Tensor a = Tensor::randn({din, r}, rng), b = Tensor::randn({r, dout}, rng);
        const lm::Delta d{Var::constant(a), Var::constant(b)};
        const Tensor bypass = lm::injectable_forward(Var::constant(x), Var::constant(w), &d).value();
        Tensor merged = w;
        const Tensor ab = t::naive_matmul(a, b);
        for (std::size_t i = 0; i < merged.size(); ++i) merged[i] += ab[i];
        worst = std::max(worst, max_abs_diff(bypass, t::naive_matmul(x, merged)));
    }
    return {worst < 1e-10, fmt::format("max abs diff {:.3e} over 1000 shapes", worst)};
}

// 3 ------------------------------------------------------------------------
Outcome rank_bound() {
    const lm::LmConfig lc{.vocab_size = 10, .d_model = 16, .n_heads = 2, .n_layers = 2, .d_ff = 32, .max_len = 8};
    const std::size_t r = 4;
    generator::Generator gen({.k = 3, .n_blocks = 2, .d_c = 8, .heads = 4, .rank = r, .targets = "qkvof"}, lc);
    Rng rng(31);
    for (const auto& p : gen.params()) {
        if (p.name.size() > 4 && p.name.compare(p.name.size() - 4, 4, "proj") == 0) {
            Var v = p.var;
            v.mutable_value() = Tensor::randn(v.shape(), rng, 0.5);
        }
    }
    double tail = 0.0, smallest_kept = 1e300;
    std::size_t matrices = 0;
    for (int trial = 0; trial < 20; ++trial) {
        const lm::DeltaSet ds =
            gen.generate(Var::constant(Tensor::randn({1, 8}, rng)), Var::constant(Tensor::randn({1, 8}, rng)));
        for (std::size_t l = 0; l < lc.n_layers; ++l) {
            for (lm::Target tg : lm::kAllTargets) {
                const lm::Delta* d = ds.get(l, tg);
                const auto sv = t::singular_values(t::naive_matmul(d->a.value(), d->b.value()));
                for (std::size_t i = r; i < sv.size(); ++i) tail = std::max(tail, sv[i]);
                smallest_kept = std::min(smallest_kept, sv[r - 1]);
                ++matrices;
            }
        }
    }
    return {tail < 1e-10, fmt::format("{} matrices, largest sigma beyond r={}: {:.3e} (sigma_r >= {:.3e})", matrices, r,
                                      tail, smallest_kept)};
}

// 4 ------------------------------------------------------------------------
Outcome gradient_correctness() {
    const train_eval::PipelineCheckResult r = train_eval::pipeline_grad_check(0, 0);
    return {r.max_error() < 1e-4, fmt::format("max rel err {:.3e} (generator {:.2e}, embeddings {:.2e}, lm {:.2e}) "
                                              "over {} entries",
                                              r.max_error(), r.generator_error, r.embedding_error, r.lm_error,
                                              r.entries)};
}

// 5 ------------------------------------------------------------------------
Outcome learnability() {
    const auto start = Clock::now();
    const cli::RunConfig rc = cli::load_config(kDesk);
    const train_eval::ExperimentConfig& x = rc.experiment;
    const train_eval::Stage st = train_eval::prepare_stage(data::gen_synthetic(rc.synthetic).dataset, x);

    const train_eval::VariantResult text =
        train_eval::run_variant(st, x, {"text_only", train_eval::InputMode::TextOnly, ""}, 0);
    const double text_valid = text.valid_auc;
    const double text_test = text.test.all.auc.value_or(-1.0);

    std::vector<double> comb_valid, id_valid, comb_test, id_test;
    const std::uint64_t lm0 = st.lm->params().checksum(), cf0 = st.cf->checksum();
    for (std::uint64_t seed : x.seeds) {
        for (auto mode : {train_eval::InputMode::Combined, train_eval::InputMode::IdOnly}) {
            const auto r = train_eval::run_variant(st, x, {"v", mode, x.generator.targets}, seed);
            const bool comb = mode == train_eval::InputMode::Combined;
            (comb ? comb_valid : id_valid).push_back(r.valid_auc);
            (comb ? comb_test : id_test).push_back(r.test.all.auc.value_or(-1.0));
            std::printf("    seed %llu %-8s best valid %.4f (epoch %zu of %zu), test %.4f\n",
                        static_cast<unsigned long long>(seed), comb ? "combined" : "id-only", r.valid_auc,
                        r.train->best_epoch, r.train->valid_auc.size(), r.test.all.auc.value_or(-1.0));
            c5_checksums.push_back({lm0, st.lm->params().checksum()});
            c5_checksums.push_back({cf0, st.cf->checksum()});
        }
    }
    auto mean = [](const std::vector<double>& v) { return train_eval::summarize(v).mean; };
    const double min_comb = *std::min_element(comb_valid.begin(), comb_valid.end());
    const double min_id = *std::min_element(id_valid.begin(), id_valid.end());
    const double gap_ci = mean(comb_test) - mean(id_test);
    const double gap_it = mean(id_test) - text_test;
    c5_seconds = seconds_since(start);

    const bool learn = min_comb >= 0.85;
    const bool text_band = text_valid >= 0.45 && text_valid <= 0.65 && text_test >= 0.45 && text_test <= 0.65;
    const bool id_ok = min_id >= 0.80;
    const bool order = gap_ci >= 0.02 && gap_it >= 0.02;
    const bool fast = c5_seconds < 15 * 60;
    std::printf("    valid AUC  combined %.4f  id-only %.4f  text-only %.4f\n", mean(comb_valid), mean(id_valid),
                text_valid);
    std::printf("    test AUC   combined %.4f  id-only %.4f  text-only %.4f\n", mean(comb_test), mean(id_test),
                text_test);
    return {learn && text_band && id_ok && order && fast,
            fmt::format("combined valid min {:.4f} (>=0.85: {}), text-only valid {:.4f} / test {:.4f} (in band: {}), "
                        "id-only valid min {:.4f} (>=0.80: {}), test gaps comb-id {:+.4f} id-text {:+.4f} (>=0.02: "
                        "{}), {:.0f}s (<900: {})",
                        min_comb, learn, text_valid, text_test, text_band, min_id, id_ok, gap_ci, gap_it, order,
                        c5_seconds, fast)};
}

// 6 ------------------------------------------------------------------------
Outcome freeze_contract() {
    workspace.prepare();
    bool same = true;
    for (const auto& [before, after] : c5_checksums) same = same && before == after;
    const int clean = cli_run(workspace.train_args("freeze_clean") + std::vector<std::string>{"--epochs", "2"});
    const auto m = nlohmann::json::parse(slurp(workspace.dir / "freeze_clean" / "manifest.json"));
    const auto& fc = m.at("frozen_checksums");
    same = same && fc.at("lm_before") == fc.at("lm_after") && fc.at("cf_before") == fc.at("cf_after");
    const int lm_fault = cli_run(workspace.train_args("freeze_lm") + std::vector<std::string>{"--inject-fault", "lm"});
    const int cf_fault = cli_run(workspace.train_args("freeze_cf") + std::vector<std::string>{"--inject-fault", "cf"});
    return {same && clean == 0 && lm_fault == 4 && cf_fault == 4,
            fmt::format("checksums unchanged over {} in-process runs + CLI run: {}; injected LM/CF writes exit {}/{}",
                        c5_checksums.size() / 2, same, lm_fault, cf_fault)};
}

// 7 ------------------------------------------------------------------------
Outcome metric_oracles() {
    Rng rng(12);
    std::size_t agree = 0, total = 0;
    for (int trial = 0; trial < 2000; ++trial) {
        const std::size_t n = 2 + rng.below(11);
        std::vector<double> s(n);
        std::vector<int> y(n);
        for (std::size_t k = 0; k < n; ++k) {
            s[k] = trial % 2 == 0 ? static_cast<double>(rng.below(4)) : rng.uniform();
            y[k] = static_cast<int>(rng.below(2));
        }
        const auto ones = std::count(y.begin(), y.end(), 1);
        if (ones == 0 || ones == static_cast<long>(n)) y[rng.below(n)] ^= 1;
        ++total;
        agree += metrics::auc(s, y) == t::brute_force_auc(s, y);
    }
    bool hand = true;
    {
        const std::vector<double> s = {0.9, 0.1, 0.2, 0.8, 0.5, 0.6};
        const std::vector<int> y = {1, 0, 1, 0, 1, 1};
        const std::vector<std::size_t> u = {0, 0, 1, 1, 2, 2};
        const auto r = metrics::uauc(s, y, u);
        hand = hand && r.value == 0.5 && r.users_counted == 2 && r.users_skipped == 1;
        const std::vector<std::size_t> one = {7, 7, 7, 7, 7, 7};
        hand = hand && metrics::uauc(s, y, one).value == metrics::auc(s, y);
        try {
            metrics::uauc(s, std::vector<int>{1, 1, 0, 0, 1, 1}, u);
            hand = false;
        } catch (const UndefinedMetricError&) {
        }
    }
    return {agree == total && total == 2000 && hand,
            fmt::format("auc == pair counting on {}/{} instances; uauc hand cases {}", agree, total,
                        hand ? "exact" : "WRONG")};
}

// 8 ------------------------------------------------------------------------
Outcome cf_structure() {
    Rng rng(8);
    double worst = 0.0;
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t users = 1 + rng.below(16), items = 1 + rng.below(16), layers = rng.below(4);
        const auto rows = t::random_graph(rng, users, items, rng.uniform());
        cf::LightGcnModel m(users, items,
                            {.kind = "lightgcn", .d_c = 4, .init_std = 1.0, .seed = static_cast<std::uint64_t>(trial),
                             .lightgcn_layers = layers},
                            rows);
        const Tensor base = ops::concat_rows({m.params().find("user_emb"), m.params().find("item_emb")}).value();
        const Tensor oracle = t::dense_lightgcn(t::dense_adjacency(users, items, rows), base, layers);
        worst = std::max(worst, max_abs_diff(m.final_table().value(), oracle));
    }
    std::size_t above = 0, below_positive = 0;
    for (int trial = 0; trial < 20; ++trial) {
        cf::SasRecModel m(1, 12, {.kind = "sasrec", .d_c = 4, .init_std = 0.5, .seed = static_cast<std::uint64_t>(trial)},
                          {});
        std::vector<std::size_t> h(1 + rng.below(20));
        for (auto& i : h) i = rng.below(12);
        std::vector<Tensor> att;
        m.hidden_states(h, &att);
        for (const Tensor& a : att) {
            for (std::size_t i = 0; i < a.rows(); ++i) {
                for (std::size_t j = 0; j < a.cols(); ++j) {
                    if (j > i && a(i, j) != 0.0) ++above;
                    if (j <= i && a(i, j) > 0.0) ++below_positive;
                }
            }
        }
    }
    return {worst < 1e-10 && above == 0 && below_positive > 0,
            fmt::format("LightGCN vs dense oracle max diff {:.3e} on 200 graphs; SASRec entries above diagonal {}",
                        worst, above)};
}

// 9 ------------------------------------------------------------------------
Outcome determinism() {
    workspace.prepare();
    const auto start = Clock::now();
    const int a = cli_run(workspace.train_args("det1"));
    const int b = cli_run(workspace.train_args("det2"));
    const double secs = seconds_since(start);
    const bool ckpt = slurp(workspace.dir / "det1" / "generator.ckpt") == slurp(workspace.dir / "det2" / "generator.ckpt");
    const bool curve = slurp(workspace.dir / "det1" / "curve.csv") == slurp(workspace.dir / "det2" / "curve.csv");
    const bool fast = c5_seconds <= 0.0 || secs < 2.0 * c5_seconds;
    return {a == 0 && b == 0 && ckpt && curve && fast,
            fmt::format("checkpoints identical: {}, curves identical: {}, {:.0f}s for both runs{}", ckpt, curve, secs,
                        c5_seconds > 0.0 ? fmt::format(" (criterion 5: {:.0f}s)", c5_seconds) : "")};
}

// 10 -----------------------------------------------------------------------
Outcome ablation() {
    workspace.prepare();
    const auto start = Clock::now();
    std::string table;
    const fs::path out = workspace.dir / "ablate";
    const int code =
        cli_run({"ablate", "--config", kDesk, "--data", (workspace.dir / "data").string(), "--cf-emb",
                 (workspace.dir / "cf" / "cf_emb.ckpt").string(), "--lm", (workspace.dir / "lm").string(), "--variants",
                 "qkvof,qkvo,qkv,qko,qk", "--seeds", "0,1,2", "--targets-only", "--out", out.string()},
                &table);
    const double secs = seconds_since(start);
    if (code != 0) return {false, fmt::format("ablate exited {}", code)};
    std::printf("%s", table.c_str());
    const auto j = nlohmann::json::parse(slurp(out / "ablation.json"));
    std::vector<std::pair<double, std::string>> order;
    bool rows_ok = j.at("rows").size() == 5;
    const std::vector<std::string> expected = {"qkvof", "qkvo", "qkv", "qko", "qk"};
    for (std::size_t k = 0; k < j.at("rows").size() && rows_ok; ++k) {
        const auto& r = j.at("rows")[k];
        rows_ok = rows_ok && r.at("variant") == expected[k] && r.at("auc").at("n") == 3;
        order.push_back({r.at("auc").at("mean").get<double>(), r.at("variant").get<std::string>()});
    }
    std::sort(order.rbegin(), order.rend());
    std::string ranking;
    for (const auto& [auc, name] : order) ranking += (ranking.empty() ? "" : " > ") + name;
    const bool files = fs::exists(out / "ablation.csv") && fs::exists(out / "ablation.md");
    return {rows_ok && files && secs < 3600,
            fmt::format("5 rows x 3 seeds: {}; test AUC ranking {} (reported only); {:.0f}s", rows_ok, ranking, secs)};
}

} // namespace

int main(int argc, char** argv) {
    const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
        {"zero-init neutrality", zero_init_neutrality},
        {"merge/bypass equivalence", merge_bypass},
        {"rank bound", rank_bound},
        {"gradient correctness", gradient_correctness},
        {"learnability and variant ordering", learnability},
        {"freeze contract", freeze_contract},
        {"metric oracles", metric_oracles},
        {"cf propagation and causality", cf_structure},
        {"determinism", determinism},
        {"ablation harness", ablation},
    };
    std::set<int> only;
    for (int i = 1; i < argc; ++i) only.insert(std::atoi(argv[i]));
    int failed = 0;
    for (std::size_t k = 0; k < criteria.size(); ++k) {
        const int id = static_cast<int>(k + 1);
        if (!only.empty() && !only.contains(id)) continue;
        const auto start = Clock::now();
        Outcome o;
        try {
            o = criteria[k].second();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        failed += !o.pass;
        std::printf("[%s] criterion %d: %s -- %s (%.1fs)\n", o.pass ? "PASS" : "FAIL", id, criteria[k].first,
                    o.detail.c_str(), seconds_since(start));
        std::fflush(stdout);
    }
    std::printf("%d criteria failed\n", failed);
    return failed == 0 ? 0 : 1;
}
