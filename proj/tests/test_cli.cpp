// Copyright (c) 2026, The cora authors
// SPDX-License-Identifier: Apache-2.0

#include <filesystem>
#include <fstream>
#include <sstream>

#include <unistd.h>

#include <gtest/gtest.h>

#include "cora/cli/cli.hpp"

using namespace cora;
namespace fs = std::filesystem;

namespace {

struct Result {
    int code;
    std::string out;
    std::string err;
};

Result cora_run(std::vector<std::string> args) {
    args.insert(args.begin(), "cora");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    std::ostringstream out, err;
    const int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
    return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), {}};
}

// A shared scratch directory holding a tiny dataset and trained artifacts.
class CliTest : public ::testing::Test {
protected:
    static fs::path dir;
    static std::string config;

    static void SetUpTestSuite() {
        dir = fs::temp_directory_path() / ("cora_cli_" + std::to_string(::getpid()));
        fs::remove_all(dir);
        fs::create_directories(dir);
        cli::RunConfig c;
        c.synthetic = {.n_users = 20, .n_items = 20, .density = 0.5, .seed = 3};
        c.experiment.warm_threshold = 6;
        c.experiment.cf_model.d_c = 4;
        c.experiment.cf_train.epochs = 20;
        c.experiment.cf_learning_rates = {0.05};
        c.experiment.cf_weight_decays = {0.1};
        c.experiment.lm = {.vocab_size = 4, .d_model = 8, .n_heads = 2, .n_layers = 1, .d_ff = 16, .max_len = 128};
        c.experiment.lm_pretrain.epochs = 1;
        c.experiment.generator = {.k = 2, .n_blocks = 1, .heads = 2, .rank = 2};
        c.experiment.train.max_epochs = 2;
        c.experiment.seeds = {0, 1};
        config = (dir / "tiny.json").string();
        std::ofstream(config) << nlohmann::json(c).dump(2);
        const std::string d = (dir / "data").string();
        ASSERT_EQ(cora_run({"gen-data", "--config", config, "--out", d}).code, 0);
        ASSERT_EQ(cora_run({"train-cf", "--config", config, "--data", d, "--out", (dir / "cf").string()}).code, 0);
        ASSERT_EQ(cora_run({"pretrain-lm", "--config", config, "--data", d, "--out", (dir / "lm").string()}).code, 0);
    }

    static void TearDownTestSuite() { fs::remove_all(dir); }

    static std::vector<std::string> cora_args(const std::string& out, std::vector<std::string> extra = {}) {
        std::vector<std::string> a = {"train-cora",   "--config", config, "--data", (dir / "data").string(),
                                      "--cf-emb",     (dir / "cf" / "cf_emb.ckpt").string(),
                                      "--lm",         (dir / "lm").string(),
                                      "--out",        (dir / out).string()};
        a.insert(a.end(), extra.begin(), extra.end());
        return a;
    }
};

fs::path CliTest::dir;
std::string CliTest::config;

} // namespace

TEST(CliConfig, UnknownKeysRejected) {
    EXPECT_THROW(cli::parse_config(nlohmann::json{{"experiment", {{"trian", 1}}}}), ConfigError);
    EXPECT_THROW(cli::parse_config(nlohmann::json{{"bogus", 1}}), ConfigError);
    const auto c = cli::parse_config(nlohmann::json{{"experiment", {{"train", {{"learning_rate", 0.5}}}}}});
    EXPECT_EQ(c.experiment.train.learning_rate, 0.5);
    EXPECT_EQ(c.experiment.train.patience, 20u);
}

TEST(CliConfig, EveryFieldHasADefault) {
    const auto c = cli::parse_config(nlohmann::json::object());
    EXPECT_EQ(nlohmann::json(c), nlohmann::json(cli::RunConfig{}));
}

TEST(CliConfig, DeskConfigParses) {
    const auto c = cli::load_config(CORA_SOURCE_DIR "/configs/desk.json");
    EXPECT_EQ(c.experiment.generator.rank, 16u);
    EXPECT_EQ(c.synthetic.n_users, 64u);
}

TEST_F(CliTest, GenDataParsesBackAndIsDeterministic) {
    const auto d1 = dir / "g1", d2 = dir / "g2";
    ASSERT_EQ(cora_run({"gen-data", "--users", "64", "--items", "64", "--latent-dim", "2", "--density", "0.1", "--out",
                        d1.string()})
                  .code,
              0);
    ASSERT_EQ(cora_run({"gen-data", "--users", "64", "--items", "64", "--latent-dim", "2", "--density", "0.1", "--out",
                        d2.string()})
                  .code,
              0);
    EXPECT_EQ(slurp(d1 / "interactions.tsv"), slurp(d2 / "interactions.tsv"));
    EXPECT_EQ(slurp(d1 / "titles.tsv"), slurp(d2 / "titles.tsv"));
    const auto ds = data::load_interactions((d1 / "interactions.tsv").string(), (d1 / "titles.tsv").string());
    const auto syn = data::gen_synthetic({});
    EXPECT_EQ(ds.interactions, syn.dataset.interactions);
    EXPECT_TRUE(fs::exists(d1 / "manifest.json"));
}

TEST_F(CliTest, GenDataZeroDensityWritesHeaderOnly) {
    const auto d = dir / "g0";
    ASSERT_EQ(cora_run({"gen-data", "--density", "0", "--out", d.string()}).code, 0);
    EXPECT_EQ(slurp(d / "interactions.tsv"), "user_id\titem_id\trating\ttimestamp\n");
}

TEST_F(CliTest, TrainCoraWritesArtifactsAndManifest) {
    const Result r = cora_run(cora_args("run", {"--targets", "qk"}));
    ASSERT_EQ(r.code, 0) << r.err;
    for (const char* f : {"generator.ckpt", "generator.json", "metrics.json", "curve.csv", "manifest.json"}) {
        EXPECT_TRUE(fs::exists(dir / "run" / f)) << f;
    }
    const auto m = nlohmann::json::parse(slurp(dir / "run" / "manifest.json"));
    EXPECT_EQ(m.at("command"), "train-cora");
    EXPECT_EQ(m.at("config").at("experiment").at("generator").at("targets"), "qk");
    EXPECT_EQ(m.at("inputs").size(), 4u);
    const auto& fc = m.at("frozen_checksums");
    EXPECT_EQ(fc.at("lm_before"), fc.at("lm_after"));
    EXPECT_EQ(fc.at("cf_before"), fc.at("cf_after"));
    const auto g = nlohmann::json::parse(slurp(dir / "run" / "generator.json"));
    EXPECT_EQ(g.at("config").at("targets"), "qk");
    EXPECT_EQ(slurp(dir / "run" / "curve.csv").substr(0, 24), "epoch,loss,valid_auc,lr\n");
}

TEST_F(CliTest, TrainCoraIsBitReproducible) {
    ASSERT_EQ(cora_run(cora_args("rep1")).code, 0);
    ASSERT_EQ(cora_run(cora_args("rep2")).code, 0);
    EXPECT_EQ(slurp(dir / "rep1" / "generator.ckpt"), slurp(dir / "rep2" / "generator.ckpt"));
    EXPECT_EQ(slurp(dir / "rep1" / "curve.csv"), slurp(dir / "rep2" / "curve.csv"));
}

TEST_F(CliTest, FlagsOverrideConfigFile) {
    ASSERT_EQ(cora_run(cora_args("flag", {"--epochs", "1", "--lr", "0.02"})).code, 0);
    const auto m = nlohmann::json::parse(slurp(dir / "flag" / "manifest.json"));
    EXPECT_EQ(m.at("config").at("experiment").at("train").at("max_epochs"), 1);
    EXPECT_EQ(m.at("config").at("experiment").at("train").at("learning_rate"), 0.02);
    EXPECT_EQ(m.at("config").at("experiment").at("lm").at("d_model"), 8);
}

TEST_F(CliTest, BadTargetsAreUsageErrorsBeforeTraining) {
    const Result r = cora_run(cora_args("bad", {"--targets", "qz"}));
    EXPECT_EQ(r.code, 1);
    EXPECT_FALSE(fs::exists(dir / "bad"));
    EXPECT_EQ(cora_run(cora_args("bad", {"--sharing", "odd"})).code, 1);
    EXPECT_EQ(cora_run({"train-cora", "--lm", "x"}).code, 1);
}

TEST_F(CliTest, MissingArtifactIsDataError) {
    std::vector<std::string> a = cora_args("missing");
    a[6] = (dir / "nope.ckpt").string();
    const Result r = cora_run(a);
    EXPECT_EQ(r.code, 2);
    EXPECT_NE(r.err.find("nope.ckpt"), std::string::npos);
}

TEST_F(CliTest, FaultsMapToExitCodes) {
    EXPECT_EQ(cora_run(cora_args("f1", {"--inject-fault", "lm"})).code, 4);
    EXPECT_EQ(cora_run(cora_args("f2", {"--inject-fault", "cf"})).code, 4);
    EXPECT_EQ(cora_run(cora_args("f3", {"--inject-fault", "nan"})).code, 3);
}

TEST_F(CliTest, EvalSplits) {
    ASSERT_EQ(cora_run(cora_args("ev")).code, 0);
    std::size_t total = 0;
    for (const char* split : {"all", "warm", "cold"}) {
        const Result r = cora_run({"eval", "--checkpoint", (dir / "ev").string(), "--split", split});
        ASSERT_EQ(r.code, 0) << r.err;
        const auto j = nlohmann::json::parse(r.out);
        EXPECT_EQ(j.at("split"), split);
        if (std::string(split) == "all") {
            total = j.at("metrics").at("count");
        } else {
            total -= j.at("metrics").at("count").get<std::size_t>();
        }
        EXPECT_TRUE(fs::exists(dir / "ev" / (std::string("eval_") + split) / "manifest.json"));
    }
    EXPECT_EQ(total, 0u);
}

TEST_F(CliTest, ExportEmbMatchesTrainCf) {
    const auto out = dir / "exported" / "emb.ckpt";
    ASSERT_EQ(cora_run({"export-emb", "--cf-model", (dir / "cf").string(), "--out", out.string()}).code, 0);
    EXPECT_EQ(slurp(out), slurp(dir / "cf" / "cf_emb.ckpt"));
    EXPECT_EQ(cora_run({"export-emb", "--cf-model", (dir / "none").string(), "--out", out.string()}).code, 2);
}

TEST_F(CliTest, AblateEmitsTable) {
    const Result r = cora_run({"ablate", "--config", config, "--data", (dir / "data").string(), "--cf-emb",
                               (dir / "cf" / "cf_emb.ckpt").string(), "--lm", (dir / "lm").string(), "--variants",
                               "qkvo,qk", "--seeds", "0,1", "--epochs", "1", "--out", (dir / "abl").string()});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_NE(r.out.find("| qkvo | "), std::string::npos);
    EXPECT_NE(r.out.find("| text_only | "), std::string::npos);
    const std::string csv = slurp(dir / "abl" / "ablation.csv");
    EXPECT_EQ(csv.substr(0, 28), "variant,auc,uauc,seed,split\n");
    EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 1 + 4 * 2 * 2);
}

TEST_F(CliTest, Gradcheck) {
    const Result r = cora_run({"gradcheck", "--entries", "2", "--out", (dir / "gc").string()});
    EXPECT_EQ(r.code, 0);
    EXPECT_NE(r.out.find("PASS"), std::string::npos);
}
