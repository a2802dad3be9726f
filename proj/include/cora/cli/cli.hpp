// Copyright (c) 2026, The cora authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <limits>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <json.hpp>

#include "cora/cf.hpp"
#include "cora/data.hpp"
#include "cora/error.hpp"
#include "cora/generator.hpp"
#include "cora/lm.hpp"
#include "cora/numerics.hpp"
#include "cora/train_eval.hpp"

namespace cora::cli {

inline constexpr const char* kVersion = "0.1.0";

enum ExitCode : int { kOk = 0, kUsage = 1, kData = 2, kTraining = 3, kContamination = 4 };

/// Resolved configuration for one command. The top-level seed is copied into
/// every stage seed when the config is resolved.
struct RunConfig {
    std::string data = "data";
    std::string out = "runs";
    std::uint64_t seed = 0;
    std::size_t threads = 1;
    double rating_threshold = data::kDefaultRatingThreshold;
    data::SyntheticConfig synthetic;
    train_eval::ExperimentConfig experiment;
};

NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(RunConfig, data, out, seed, threads, rating_threshold, synthetic,
                                                experiment)

/// Throws ConfigError naming the first key of `given` that `defaults` lacks.
inline void reject_unknown(const nlohmann::json& given, const nlohmann::json& defaults, const std::string& path = "") {
    if (!given.is_object()) {
        return;
    }
    for (const auto& [key, value] : given.items()) {
        const std::string where = path.empty() ? key : path + "." + key;
        if (!defaults.is_object() || !defaults.contains(key)) {
            throw ConfigError("config: unknown key '" + where + "'");
        }
        if (defaults.at(key).is_object()) {
            reject_unknown(value, defaults.at(key), where);
        }
    }
}

inline RunConfig parse_config(const nlohmann::json& j) {
    reject_unknown(j, nlohmann::json(RunConfig{}));
    try {
        return j.get<RunConfig>();
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("config: ") + e.what());
    }
}

inline RunConfig load_config(const std::string& path) {
    if (path.empty()) {
        return {};
    }
    std::ifstream in(path);
    if (!in) {
        throw ConfigError("config: cannot open '" + path + "'");
    }
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("config: '" + path + "' is not valid JSON: " + e.what());
    }
    return parse_config(j);
}

inline void apply_seed(RunConfig& c) {
    auto& x = c.experiment;
    c.synthetic.seed = c.seed;
    x.cf_model.seed = x.cf_train.seed = c.seed;
    x.lm_seed = x.lm_pretrain.seed = c.seed;
    x.generator.seed = x.train.seed = c.seed;
    x.train.eval_threads = c.threads;
}

// ---- files --------------------------------------------------------------

namespace fs = std::filesystem;

inline std::string file_checksum(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError("cannot read '" + path + "'");
    }
    std::uint64_t h = 1469598103934665603ULL;
    char buf[4096];
    while (in.read(buf, sizeof buf) || in.gcount() > 0) {
        for (std::streamsize i = 0; i < in.gcount(); ++i) {
            h = (h ^ static_cast<unsigned char>(buf[i])) * 1099511628211ULL;
        }
    }
    return fmt::format("{:016x}", h);
}

inline void require_file(const std::string& path, const char* what) {
    if (!fs::is_regular_file(path)) {
        throw IoError(std::string(what) + " not found: '" + path + "'");
    }
}

inline void ensure_dir(const std::string& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec || !fs::is_directory(dir)) {
        throw IoError("cannot create directory '" + dir + "'");
    }
}

inline std::string join(const std::string& dir, const std::string& name) { return (fs::path(dir) / name).string(); }

inline void write_json(const std::string& path, const nlohmann::json& j) {
    std::ofstream out(path);
    out << j.dump(2) << '\n';
    if (!out) {
        throw IoError("cannot write '" + path + "'");
    }
}

inline nlohmann::json read_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw IoError("cannot read '" + path + "'");
    }
    try {
        return nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw IoError("'" + path + "' is not valid JSON: " + e.what());
    }
}

struct DataFiles {
    std::string interactions;
    std::string titles;
};

inline DataFiles data_files(const std::string& dir) {
    return {join(dir, "interactions.tsv"), join(dir, "titles.tsv")};
}

inline data::Dataset load_data(const std::string& dir, double threshold) {
    const DataFiles f = data_files(dir);
    require_file(f.interactions, "interactions file");
    require_file(f.titles, "titles file");
    return data::load_interactions(f.interactions, f.titles, threshold);
}

// ---- manifests ----------------------------------------------------------

struct Manifest {
    std::string command;
    std::vector<std::string> argv;
    nlohmann::json config;
    std::map<std::string, std::string> inputs;  // path -> checksum
    std::map<std::string, std::string> outputs; // path -> checksum
    nlohmann::json extra = nlohmann::json::object();

    void input(const std::string& path) { inputs[path] = file_checksum(path); }
    void output(const std::string& path) { outputs[path] = file_checksum(path); }

    void write(const std::string& dir) const {
        nlohmann::json j = {{"command", command},
                            {"argv", argv},
                            {"config", config},
                            {"inputs", inputs},
                            {"outputs", outputs},
                            {"versions", {{"cora", kVersion}, {"compiler", __VERSION__}, {"cplusplus", __cplusplus}}}};
        for (const auto& [k, v] : extra.items()) {
            j[k] = v;
        }
        write_json(join(dir, "manifest.json"), j);
    }
};

// ---- artifacts ----------------------------------------------------------

struct LmArtifact {
    std::unique_ptr<lm::LanguageModel> model;
    data::Vocabulary vocab;
    std::size_t max_history = data::kDefaultHistoryLength;
    std::uint64_t data_hash = 0;
};

inline LmArtifact load_lm(const std::string& dir) {
    const std::string meta = join(dir, "lm.json");
    const std::string ckpt = join(dir, "lm.ckpt");
    require_file(meta, "language model metadata");
    require_file(ckpt, "language model checkpoint");
    const nlohmann::json j = read_json(meta);
    LmArtifact a;
    a.vocab = data::Vocabulary::from_json(j.at("vocab"));
    a.max_history = j.value("max_history", a.max_history);
    a.data_hash = j.value("data_hash", std::uint64_t{0});
    a.model = std::make_unique<lm::LanguageModel>(j.at("config").get<lm::LmConfig>(), 0);
    checkpoint::load_into(ckpt, a.model->params());
    a.model->freeze();
    return a;
}

inline cf::CfEmbeddings load_cf(const std::string& path) {
    require_file(path, "cf embeddings");
    return cf::CfEmbeddings::load(path);
}

/// Artifacts must come from the same training split.
inline void check_lineage(std::uint64_t expected, std::uint64_t found, const char* what) {
    if (found != 0 && found != expected) {
        throw ValidationError(std::string(what) + " were trained on a different dataset or split");
    }
}

inline void check_cf_coverage(const cf::CfEmbeddings& emb, const data::Dataset& ds) {
    if (emb.user_count() < ds.catalog.user_count() || emb.item_count() < ds.catalog.item_count()) {
        throw ValidationError(fmt::format("cf embeddings cover {} users / {} items; data has {} / {}",
                                          emb.user_count(), emb.item_count(), ds.catalog.user_count(),
                                          ds.catalog.item_count()));
    }
}

// ---- commands -----------------------------------------------------------

struct Context {
    RunConfig cfg;
    std::vector<std::string> argv;
    std::ostream& out;
    std::ostream& err;

    Manifest manifest(const std::string& command) const {
        Manifest m;
        m.command = command;
        m.argv = argv;
        m.config = cfg;
        return m;
    }
};

inline int cmd_gen_data(Context& ctx, const std::string& out_dir) {
    const data::SyntheticDataset syn = data::gen_synthetic(ctx.cfg.synthetic);
    ensure_dir(out_dir);
    const DataFiles f = data_files(out_dir);
    data::save_dataset(syn.dataset, f.interactions, f.titles);
    Manifest m = ctx.manifest("gen-data");
    m.output(f.interactions);
    m.output(f.titles);
    m.extra["records"] = syn.dataset.interactions.size();
    m.extra["median_score"] = syn.median;
    m.write(out_dir);
    ctx.out << fmt::format("wrote {} interactions over {} items to {}\n", syn.dataset.interactions.size(),
                           syn.dataset.catalog.item_count(), out_dir);
    return kOk;
}

inline int cmd_train_cf(Context& ctx, const std::string& out_dir) {
    const auto& x = ctx.cfg.experiment;
    const data::Dataset ds = load_data(ctx.cfg.data, ctx.cfg.rating_threshold);
    const data::DatasetSplits splits = data::mark_warm_cold(data::build_splits(ds.interactions, x.valid_frac, x.test_frac),
                                                            x.warm_threshold);
    ensure_dir(out_dir);
    cf::CfGridResult grid = cf::grid_search_cf(x.cf_model, splits, ds.catalog.user_count(), ds.catalog.item_count(),
                                               x.cf_train, x.cf_learning_rates, x.cf_weight_decays);
    const std::uint64_t hash = cf::fingerprint(splits.train);
    const std::string model_ckpt = join(out_dir, "cf_model.ckpt");
    const std::string emb_path = join(out_dir, "cf_emb.ckpt");
    checkpoint::save(model_ckpt, grid.model->params());
    grid.model->export_embeddings(hash).save(emb_path);
    write_json(join(out_dir, "cf_model.json"), {{"config", x.cf_model},
                                                {"users", ds.catalog.user_count()},
                                                {"items", ds.catalog.item_count()},
                                                {"data", ctx.cfg.data},
                                                {"data_hash", hash},
                                                {"chosen", grid.chosen},
                                                {"report", grid.report},
                                                {"trials", grid.trials}});
    write_json(join(out_dir, "splits.json"), data::splits_manifest(splits));

    Manifest m = ctx.manifest("train-cf");
    const DataFiles f = data_files(ctx.cfg.data);
    m.input(f.interactions);
    m.input(f.titles);
    for (const char* name : {"cf_model.ckpt", "cf_emb.ckpt", "cf_emb.ckpt.json", "cf_model.json", "splits.json"}) {
        m.output(join(out_dir, name));
    }
    m.extra["chosen"] = grid.chosen;
    m.extra["best_valid_auc"] = grid.report.best_valid_auc;
    m.write(out_dir);
    ctx.out << fmt::format("{}: best validation AUC {:.4f} (lr {}, wd {}, epoch {})\n", x.cf_model.kind,
                           grid.report.best_valid_auc, grid.chosen.learning_rate, grid.chosen.weight_decay,
                           grid.report.best_epoch);
    return kOk;
}

inline int cmd_export_emb(Context& ctx, const std::string& model_dir, const std::string& out_path) {
    const std::string meta = join(model_dir, "cf_model.json");
    const std::string ckpt = join(model_dir, "cf_model.ckpt");
    require_file(meta, "cf model metadata");
    require_file(ckpt, "cf model checkpoint");
    const nlohmann::json j = read_json(meta);
    const auto mc = j.at("config").get<cf::CfModelConfig>();
    const auto& x = ctx.cfg.experiment;
    const data::Dataset ds = load_data(j.value("data", ctx.cfg.data), ctx.cfg.rating_threshold);
    const data::DatasetSplits splits = data::build_splits(ds.interactions, x.valid_frac, x.test_frac);
    const std::uint64_t hash = cf::fingerprint(splits.train);
    check_lineage(hash, j.value("data_hash", std::uint64_t{0}), "cf model parameters");
    auto model = cf::make_model(mc, j.at("users").get<std::size_t>(), j.at("items").get<std::size_t>(), splits.train);
    checkpoint::load_into(ckpt, model->params());
    const fs::path parent = fs::path(out_path).parent_path();
    const std::string out_dir = parent.empty() ? "." : parent.string();
    ensure_dir(out_dir);
    model->export_embeddings(hash).save(out_path);
    Manifest m = ctx.manifest("export-emb");
    m.input(meta);
    m.input(ckpt);
    m.output(out_path);
    m.output(out_path + ".json");
    m.write(out_dir);
    ctx.out << "wrote " << out_path << '\n';
    return kOk;
}

inline int cmd_pretrain_lm(Context& ctx, const std::string& out_dir) {
    const auto& x = ctx.cfg.experiment;
    const data::Dataset ds = load_data(ctx.cfg.data, ctx.cfg.rating_threshold);
    const data::DatasetSplits splits = data::build_splits(ds.interactions, x.valid_frac, x.test_frac);
    const data::Vocabulary vocab = train_eval::training_vocabulary(splits, ds.catalog, x.max_history);
    ensure_dir(out_dir);
    lm::PretrainReport report;
    const auto model = train_eval::pretrain_for(splits, ds.catalog, vocab, x, &report);
    const std::string ckpt = join(out_dir, "lm.ckpt");
    checkpoint::save(ckpt, model->params());
    write_json(join(out_dir, "lm.json"), {{"config", model->config()},
                                          {"vocab", vocab.to_json()},
                                          {"max_history", x.max_history},
                                          {"data_hash", cf::fingerprint(splits.train)},
                                          {"pretrain", x.lm_pretrain},
                                          {"epoch_loss", report.epoch_loss}});
    Manifest m = ctx.manifest("pretrain-lm");
    const DataFiles f = data_files(ctx.cfg.data);
    m.input(f.interactions);
    m.input(f.titles);
    m.output(ckpt);
    m.output(join(out_dir, "lm.json"));
    m.extra["lm_checksum"] = model->params().checksum();
    m.write(out_dir);
    ctx.out << fmt::format("pretrained LM: vocab {}, final loss {:.4f}\n", vocab.size(),
                           report.epoch_loss.empty() ? 0.0 : report.epoch_loss.back());
    return kOk;
}

struct CoraArgs {
    std::string cf_emb;
    std::string lm_dir;
    std::string targets = "qkvo";
    std::string sharing = "per_type";
    std::string mode = "combined";
    std::string fault; // hidden: lm | cf | nan
};

inline train_eval::InputMode parse_mode(const std::string& m) {
    if (m == "combined") return train_eval::InputMode::Combined;
    if (m == "id_only") return train_eval::InputMode::IdOnly;
    if (m == "text_only") return train_eval::InputMode::TextOnly;
    throw ConfigError("unknown input mode '" + m + "'");
}

inline train_eval::Stage stage_from_artifacts(const RunConfig& cfg, const std::string& cf_path,
                                              const std::string& lm_dir, const std::string& data_dir) {
    auto x = cfg.experiment;
    data::Dataset ds = load_data(data_dir, cfg.rating_threshold);
    cf::CfEmbeddings emb = load_cf(cf_path);
    LmArtifact lm_art = load_lm(lm_dir);
    check_cf_coverage(emb, ds);
    x.max_history = lm_art.max_history;
    const std::uint64_t hash = cf::fingerprint(data::build_splits(ds.interactions, x.valid_frac, x.test_frac).train);
    check_lineage(hash, emb.data_hash(), "cf embeddings");
    check_lineage(hash, lm_art.data_hash, "language model weights");
    return train_eval::build_stage(std::move(ds), x, std::move(emb), std::move(lm_art.model), std::move(lm_art.vocab));
}

inline int cmd_train_cora(Context& ctx, const CoraArgs& a, const std::string& out_dir) {
    // Reject bad target strings and modes before touching any file.
    lm::parse_targets(a.targets);
    const train_eval::InputMode mode = parse_mode(a.mode);
    if (mode == train_eval::InputMode::TextOnly) {
        throw ConfigError("train-cora: text_only has nothing to train");
    }
    auto& x = ctx.cfg.experiment;
    x.generator.targets = a.targets;
    x.generator.sharing = nlohmann::json(a.sharing).get<generator::Sharing>();
    x.train.validate();
    train_eval::Stage st = stage_from_artifacts(ctx.cfg, a.cf_emb, a.lm_dir, ctx.cfg.data);

    train_eval::TrainHooks hooks;
    if (a.fault == "lm") {
        hooks.on_epoch_end = [&st](std::size_t) {
            Var w = st.lm->params().find("final_norm");
            w.mutable_value()[0] += 1e-6;
        };
    } else if (a.fault == "cf") {
        hooks.on_epoch_end = [&st](std::size_t) { const_cast<Tensor&>(st.cf->users())[0] += 1e-6; };
    } else if (a.fault == "nan") {
        hooks.on_step = [](std::size_t step, double& loss) {
            if (step == 2) loss = std::numeric_limits<double>::quiet_NaN();
        };
    } else if (!a.fault.empty()) {
        throw ConfigError("unknown fault '" + a.fault + "'");
    }
    ensure_dir(out_dir);
    const std::uint64_t lm_before = st.lm->params().checksum();
    const std::uint64_t cf_before = st.cf->checksum();
    const train_eval::VariantResult r =
        train_eval::run_variant(st, x, {a.targets, mode, a.targets}, x.train.seed, hooks);

    const std::string ckpt = join(out_dir, "generator.ckpt");
    checkpoint::save(ckpt, r.generator->params());
    generator::GeneratorConfig gc = r.generator->config();
    write_json(join(out_dir, "generator.json"), {{"config", gc},
                                                 {"mode", mode},
                                                 {"cf_emb", fs::absolute(a.cf_emb).string()},
                                                 {"lm", fs::absolute(a.lm_dir).string()},
                                                 {"data", fs::absolute(ctx.cfg.data).string()},
                                                 {"experiment", x},
                                                 {"rating_threshold", ctx.cfg.rating_threshold}});
    write_json(join(out_dir, "metrics.json"), r);
    {
        std::ofstream curve(join(out_dir, "curve.csv"));
        train_eval::write_curve(curve, *r.train);
    }
    Manifest m = ctx.manifest("train-cora");
    m.input(a.cf_emb);
    m.input(join(a.lm_dir, "lm.ckpt"));
    const DataFiles f = data_files(ctx.cfg.data);
    m.input(f.interactions);
    m.input(f.titles);
    for (const char* name : {"generator.ckpt", "generator.json", "metrics.json", "curve.csv"}) {
        m.output(join(out_dir, name));
    }
    m.extra["frozen_checksums"] = {{"lm_before", lm_before},
                                   {"lm_after", st.lm->params().checksum()},
                                   {"cf_before", cf_before},
                                   {"cf_after", st.cf->checksum()}};
    m.write(out_dir);
    ctx.out << fmt::format("best validation AUC {:.4f} at epoch {} ({} steps); test AUC {}\n", r.train->best_valid_auc,
                           r.train->best_epoch, r.train->steps, train_eval::format_optional(r.test.all.auc));
    return kOk;
}

inline int cmd_eval(Context& ctx, const std::string& run_dir, const std::string& split, std::string out_dir) {
    const std::string meta = join(run_dir, "generator.json");
    const std::string ckpt = join(run_dir, "generator.ckpt");
    require_file(meta, "generator metadata");
    require_file(ckpt, "generator checkpoint");
    const nlohmann::json j = read_json(meta);
    RunConfig cfg = ctx.cfg;
    cfg.experiment = j.at("experiment").get<train_eval::ExperimentConfig>();
    cfg.experiment.train.eval_threads = ctx.cfg.threads;
    cfg.rating_threshold = j.value("rating_threshold", cfg.rating_threshold);
    const train_eval::Stage st = stage_from_artifacts(cfg, j.at("cf_emb"), j.at("lm"), j.at("data"));
    generator::Generator gen(j.at("config").get<generator::GeneratorConfig>(), st.lm->config());
    checkpoint::load_into(ckpt, gen.params());
    const auto mode = j.at("mode").get<train_eval::InputMode>();
    const train_eval::Pipeline p{*st.cf, &gen, *st.lm};
    const metrics::MetricsReport rep =
        train_eval::evaluate_samples(st.samples_for(mode).test, st.splits.test_warm, p, ctx.cfg.threads);
    const metrics::PartitionMetrics& part = split == "warm" ? rep.warm : split == "cold" ? rep.cold : rep.all;
    if (part.count == 0) {
        ctx.err << "warning: the " << split << " partition of the test split is empty\n";
    }
    nlohmann::json result = {{"split", split}, {"mode", mode}, {"metrics", part}};
    ctx.out << result.dump(2) << '\n';
    if (out_dir.empty()) {
        out_dir = join(run_dir, "eval_" + split);
    }
    ensure_dir(out_dir);
    const std::string path = join(out_dir, "metrics.json");
    write_json(path, result);
    Manifest m = ctx.manifest("eval");
    m.config = cfg;
    m.input(ckpt);
    m.input(j.at("cf_emb"));
    m.output(path);
    m.write(out_dir);
    return kOk;
}

struct AblateArgs {
    std::string cf_emb;
    std::string lm_dir;
    std::vector<std::string> variants = train_eval::default_target_sets();
    std::vector<std::uint64_t> seeds;
    bool input_variants = true;
};

inline int cmd_ablate(Context& ctx, const AblateArgs& a, const std::string& out_dir) {
    auto& x = ctx.cfg.experiment;
    if (!a.seeds.empty()) {
        x.seeds = a.seeds;
    }
    for (const auto& v : a.variants) {
        lm::parse_targets(v);
    }
    if (a.cf_emb.empty() != a.lm_dir.empty()) {
        throw ConfigError("ablate: pass both --cf-emb and --lm, or neither");
    }
    ensure_dir(out_dir);
    auto say = [&ctx](const std::string& msg) { ctx.err << msg << '\n'; };
    const train_eval::Stage st =
        a.cf_emb.empty() ? train_eval::prepare_stage(load_data(ctx.cfg.data, ctx.cfg.rating_threshold), x, say)
                         : stage_from_artifacts(ctx.cfg, a.cf_emb, a.lm_dir, ctx.cfg.data);
    std::vector<train_eval::VariantSpec> specs = train_eval::ablation_variants(a.variants);
    if (!a.input_variants) {
        specs.resize(a.variants.size());
    }
    const train_eval::AblationResult res = train_eval::run_ablation(st, x, specs, [&](const auto& r) {
        ctx.err << fmt::format("{} seed {}: valid AUC {:.4f}, test AUC {}\n", r.name, r.seed, r.valid_auc,
                               train_eval::format_optional(r.test.all.auc));
    });
    {
        std::ofstream csv(join(out_dir, "ablation.csv"));
        train_eval::write_ablation_csv(csv, res.runs);
        std::ofstream md(join(out_dir, "ablation.md"));
        train_eval::write_ablation_table(md, res.rows);
    }
    write_json(join(out_dir, "ablation.json"), {{"rows", res.rows}, {"runs", res.runs}});
    train_eval::write_ablation_table(ctx.out, res.rows);
    Manifest m = ctx.manifest("ablate");
    const DataFiles f = data_files(ctx.cfg.data);
    m.input(f.interactions);
    m.input(f.titles);
    for (const char* name : {"ablation.csv", "ablation.md", "ablation.json"}) {
        m.output(join(out_dir, name));
    }
    m.extra["variants"] = a.variants;
    m.write(out_dir);
    return kOk;
}

inline int cmd_gradcheck(Context& ctx, std::size_t entries, const std::string& out_dir) {
    const train_eval::PipelineCheckResult r = train_eval::pipeline_grad_check(ctx.cfg.seed, entries);
    const bool ok = r.max_error() < 1e-4;
    ctx.out << fmt::format("generator   max rel err {:.3e}\n", r.generator_error);
    ctx.out << fmt::format("embeddings  max rel err {:.3e}\n", r.embedding_error);
    ctx.out << fmt::format("lm weights  max rel err {:.3e}\n", r.lm_error);
    ctx.out << fmt::format("{} entries; max {:.3e} {} 1e-4: {}\n", r.entries, r.max_error(), ok ? "<" : ">=",
                           ok ? "PASS" : "FAIL");
    ensure_dir(out_dir);
    write_json(join(out_dir, "gradcheck.json"), r);
    Manifest m = ctx.manifest("gradcheck");
    m.output(join(out_dir, "gradcheck.json"));
    m.write(out_dir);
    return ok ? kOk : kTraining;
}

// ---- entry point --------------------------------------------------------

/// Parses `argv` and runs one command. Errors are reported on `err` and
/// mapped to exit codes.
inline int run(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
    CLI::App app{"cora: collaborative low-rank weights for a frozen toy LM", "cora"};
    app.require_subcommand(1);
    app.set_version_flag("--version", kVersion);

    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> threads;
    std::optional<std::string> data_dir;
    std::string out_dir;

    auto common = [&](CLI::App* sub, bool with_data) {
        sub->add_option("--config", config_path, "JSON config file (flags override it)");
        sub->add_option("--seed", seed, "Seed for every stage");
        sub->add_option("--threads", threads, "Evaluation worker threads");
        sub->add_option("--out", out_dir, "Output directory");
        if (with_data) {
            sub->add_option("--data", data_dir, "Directory with interactions.tsv and titles.tsv");
        }
    };

    // gen-data
    std::optional<std::size_t> users, items, latent;
    std::optional<double> density, title_noise, label_noise;
    CLI::App* gen = app.add_subcommand("gen-data", "Write a synthetic dataset");
    common(gen, false);
    gen->add_option("--users", users);
    gen->add_option("--items", items);
    gen->add_option("--latent-dim", latent);
    gen->add_option("--density", density)->check(CLI::Range(0.0, 1.0));
    gen->add_option("--title-noise", title_noise)->check(CLI::Range(0.0, 1.0));
    gen->add_option("--label-noise", label_noise)->check(CLI::Range(0.0, 1.0));

    // train-cf
    std::optional<std::string> cf_kind;
    std::optional<std::size_t> cf_dim;
    CLI::App* tcf = app.add_subcommand("train-cf", "Pretrain a CF model and export its embeddings");
    common(tcf, true);
    tcf->add_option("--model", cf_kind)->check(CLI::IsMember({"mf", "lightgcn", "sasrec"}));
    tcf->add_option("--dim", cf_dim, "Embedding width d_c");

    // export-emb
    std::string cf_model_dir;
    std::string emb_out;
    CLI::App* exp = app.add_subcommand("export-emb", "Export frozen embeddings from a train-cf directory");
    exp->add_option("--config", config_path);
    exp->add_option("--cf-model", cf_model_dir)->required();
    exp->add_option("--out", emb_out)->required();

    // pretrain-lm
    std::optional<std::size_t> lm_epochs;
    CLI::App* plm = app.add_subcommand("pretrain-lm", "Pretrain and freeze the toy LM");
    common(plm, true);
    plm->add_option("--epochs", lm_epochs);

    // train-cora
    CoraArgs cora_args;
    std::optional<std::size_t> epochs, batch;
    std::optional<double> lr;
    CLI::App* tc = app.add_subcommand("train-cora", "Train the weight generator");
    common(tc, true);
    tc->add_option("--cf-emb", cora_args.cf_emb, "CF embedding checkpoint")->required();
    tc->add_option("--lm", cora_args.lm_dir, "pretrain-lm output directory")->required();
    tc->add_option("--targets", cora_args.targets, "Weights receiving deltas, e.g. qkvo or qkvof");
    tc->add_option("--sharing", cora_args.sharing)->check(CLI::IsMember({"per_type", "per_layer"}));
    tc->add_option("--mode", cora_args.mode)->check(CLI::IsMember({"combined", "id_only"}));
    tc->add_option("--epochs", epochs);
    tc->add_option("--batch-size", batch);
    tc->add_option("--lr", lr);
    tc->add_option("--inject-fault", cora_args.fault)->group("");

    // eval
    std::string run_dir;
    std::string split = "all";
    CLI::App* ev = app.add_subcommand("eval", "Score the test split with a trained generator");
    common(ev, false);
    ev->add_option("--checkpoint", run_dir, "train-cora output directory")->required();
    ev->add_option("--split", split)->check(CLI::IsMember({"all", "warm", "cold"}));

    // ablate
    AblateArgs ab;
    std::string variants_csv;
    std::string seeds_csv;
    bool targets_only = false;
    CLI::App* abl = app.add_subcommand("ablate", "Compare target sets and input variants over seeds");
    common(abl, true);
    abl->add_option("--variants", variants_csv, "Comma-separated target sets");
    abl->add_option("--seeds", seeds_csv, "Comma-separated generator seeds");
    abl->add_option("--cf-emb", ab.cf_emb);
    abl->add_option("--lm", ab.lm_dir);
    abl->add_flag("--targets-only", targets_only, "Skip the text-only and ID-only rows");
    abl->add_option("--epochs", epochs, "Maximum generator epochs per run");

    // gradcheck
    std::size_t entries = 0;
    CLI::App* gc = app.add_subcommand("gradcheck", "Finite-difference check of the full pipeline");
    common(gc, false);
    gc->add_option("--entries", entries, "Entries checked per tensor (0 = all)");

    std::vector<std::string> args;
    for (int i = argc - 1; i > 0; --i) {
        args.emplace_back(argv[i]);
    }
    try {
        app.parse(args);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kOk : kUsage;
    }

    std::vector<std::string> forward(argv, argv + argc);
    try {
        Context ctx{load_config(config_path), std::move(forward), out, err};
        RunConfig& c = ctx.cfg;
        if (seed) c.seed = *seed;
        if (threads) c.threads = *threads;
        if (data_dir) c.data = *data_dir;
        if (users) c.synthetic.n_users = *users;
        if (items) c.synthetic.n_items = *items;
        if (latent) c.synthetic.latent_dim = *latent;
        if (density) c.synthetic.density = *density;
        if (title_noise) c.synthetic.title_noise = *title_noise;
        if (label_noise) c.synthetic.label_noise = *label_noise;
        if (cf_kind) c.experiment.cf_model.kind = *cf_kind;
        if (cf_dim) c.experiment.cf_model.d_c = *cf_dim;
        if (lm_epochs) c.experiment.lm_pretrain.epochs = *lm_epochs;
        if (epochs) c.experiment.train.max_epochs = *epochs;
        if (batch) c.experiment.train.batch_size = *batch;
        if (lr) c.experiment.train.learning_rate = *lr;
        apply_seed(c);
        auto out_or = [&](const std::string& fallback) { return out_dir.empty() ? join(c.out, fallback) : out_dir; };

        if (gen->parsed()) return cmd_gen_data(ctx, out_dir.empty() ? c.data : out_dir);
        if (tcf->parsed()) return cmd_train_cf(ctx, out_or("cf"));
        if (exp->parsed()) return cmd_export_emb(ctx, cf_model_dir, emb_out);
        if (plm->parsed()) return cmd_pretrain_lm(ctx, out_or("lm"));
        if (tc->parsed()) return cmd_train_cora(ctx, cora_args, out_or("cora"));
        if (ev->parsed()) return cmd_eval(ctx, run_dir, split, out_dir);
        if (abl->parsed()) {
            if (!variants_csv.empty()) {
                ab.variants.clear();
                std::stringstream ss(variants_csv);
                for (std::string v; std::getline(ss, v, ',');) ab.variants.push_back(v);
            }
            if (!seeds_csv.empty()) {
                std::stringstream ss(seeds_csv);
                for (std::string v; std::getline(ss, v, ',');) ab.seeds.push_back(std::stoull(v));
            }
            ab.input_variants = !targets_only;
            return cmd_ablate(ctx, ab, out_or("ablate"));
        }
        if (gc->parsed()) return cmd_gradcheck(ctx, entries, out_or("gradcheck"));
        return kUsage;
    } catch (const ContaminationError& e) {
        err << "contamination: " << e.what() << '\n';
        return kContamination;
    } catch (const TrainingError& e) {
        err << "training failed: " << e.what() << '\n';
        return kTraining;
    } catch (const NumericError& e) {
        err << "training failed: " << e.what() << '\n';
        return kTraining;
    } catch (const ConfigError& e) {
        err << "usage: " << e.what() << '\n';
        return kUsage;
    } catch (const InjectionError& e) {
        err << "usage: " << e.what() << '\n';
        return kUsage;
    } catch (const std::invalid_argument& e) {
        err << "usage: bad number in a list: " << e.what() << '\n';
        return kUsage;
    } catch (const Error& e) {
        err << "data error: " << e.what() << '\n';
        return kData;
    } catch (const nlohmann::json::exception& e) {
        err << "data error: " << e.what() << '\n';
        return kData;
    }
}

} // namespace cora::cli
