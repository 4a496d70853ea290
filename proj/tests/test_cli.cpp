// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <fstream>
#include <sstream>

#include "rankdist/cli.hpp"
#include "rankdist/distortion.hpp"
#include "rankdist/model.hpp"
#include "rankdist/ranking.hpp"
#include "rankdist/report.hpp"
#include "support.hpp"

namespace rankdist {
namespace {

using test::TempDir;

struct CliResult {
  int code = 0;
  std::string out;
  std::string err;
};

CliResult run(std::vector<std::string> args) {
  std::ostringstream out, err;
  CliResult r;
  r.code = run_cli(args, out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

ImageRGB quantized(ImageRGB img) {
  for (double& v : img.samples()) v = quantize_sample(v) / 255.0;
  return img;
}

std::vector<std::string> small_corpus_args(const std::filesystem::path& out) {
  return {"gen-dataset", "--kind", "lca", "--count", "30", "--pairs-per-source", "1",
          "--max-rois", "2", "--size", "96", "--seed", "4", "--out", out.string()};
}

class CliCorpus : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    dir_ = new TempDir("cli_corpus");
    const CliResult r = run(small_corpus_args(*dir_ / "corpus"));
    ASSERT_EQ(r.code, 0) << r.err;
  }
  static void TearDownTestSuite() {
    delete dir_;
    dir_ = nullptr;
  }
  static std::string manifest() { return (*dir_ / "corpus" / "manifest.jsonl").string(); }

  static TempDir* dir_;
};

TempDir* CliCorpus::dir_ = nullptr;

TEST_F(CliCorpus, GenDatasetIsReproducible) {
  TempDir d("cli_repro");
  const CliResult r = run(small_corpus_args(d / "again"));
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("seed: 4"), std::string::npos);
  EXPECT_EQ(test::read_bytes(d / "again" / "manifest.jsonl"), test::read_bytes(manifest()));
}

TEST_F(CliCorpus, TrainWritesCheckpointAndHistory) {
  TempDir d("cli_train");
  const CliResult r = run({"train", "--manifest", manifest(), "--out", (d / "m.rkds").string(), "--history",
                     (d / "h.csv").string(), "--epochs", "2", "--batch-size", "8", "--eval-every", "2", "--seed", "3"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("final val TP: "), std::string::npos);
  const ScorerModel m = load_checkpoint(d / "m.rkds");
  EXPECT_EQ(m.arch_id, kSmallV1);
  const std::string history = test::read_bytes(d / "h.csv");
  EXPECT_EQ(history.substr(0, history.find("\r\n")), "batch,train_loss,val_tp");
  EXPECT_GE(std::count(history.begin(), history.end(), '\n'), 2);
}

TEST_F(CliCorpus, ZeroEpochsSavesInitialization) {
  TempDir d("cli_zero");
  const CliResult r = run({"train", "--manifest", manifest(), "--out", (d / "m.rkds").string(), "--epochs", "0", "--seed", "8"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("no training steps"), std::string::npos);
  EXPECT_EQ(load_checkpoint(d / "m.rkds"), init_model(kSmallV1, 8));
}

TEST_F(CliCorpus, EvalPairsMatchesTpRate) {
  TempDir d("cli_eval");
  const ScorerModel m = init_model(kSmallV1, 2);
  save_checkpoint(m, d / "m.rkds");
  const CliResult r = run({"eval-pairs", "--checkpoint", (d / "m.rkds").string(), "--manifest", manifest(), "--split",
                     "train", "--csv", (d / "e.csv").string(), "--svg", (d / "e.svg").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto pairs = load_pairs(read_manifest(manifest()), Split::Train);
  std::ostringstream expected;
  expected << "TP: " << format_number(tp_rate(m, pairs)) << "%";
  EXPECT_NE(r.out.find(expected.str()), std::string::npos) << r.out;
  const std::string csv = test::read_bytes(d / "e.csv");
  EXPECT_EQ(static_cast<std::size_t>(std::count(csv.begin(), csv.end(), '\n')), pairs.size() + 2);
  EXPECT_NE(test::read_bytes(d / "e.svg").find("<svg"), std::string::npos);
}

TEST_F(CliCorpus, ConfigFileValuesAndOverrides) {
  TempDir d("cli_config");
  std::ofstream(d / "c.json") << R"({"epochs": 0, "seed": 5})";
  CliResult r = run({"train", "--config", (d / "c.json").string(), "--manifest", manifest(), "--out",
               (d / "a.rkds").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(load_checkpoint(d / "a.rkds"), init_model(kSmallV1, 5));

  r = run({"train", "--config", (d / "c.json").string(), "--manifest", manifest(), "--out", (d / "b.rkds").string(),
           "--seed", "6"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(load_checkpoint(d / "b.rkds"), init_model(kSmallV1, 6));

  std::ofstream(d / "bad.json") << R"({"epochz": 1})";
  r = run({"train", "--config", (d / "bad.json").string(), "--manifest", manifest(), "--out", (d / "c.rkds").string()});
  EXPECT_EQ(r.code, kExitUsage);
  r = run({"train", "--config", (d / "absent.json").string(), "--manifest", manifest(), "--out", "x"});
  EXPECT_EQ(r.code, kExitUsage);
}

TEST(Cli, UsageErrors) {
  EXPECT_EQ(run({}).code, kExitUsage);
  EXPECT_EQ(run({"gen-dataset", "--kind", "lca"}).code, kExitUsage);
  EXPECT_EQ(run({"gen-dataset", "--kind", "blur", "--out", "x"}).code, kExitUsage);
  EXPECT_EQ(run({"frobnicate"}).code, kExitUsage);
  const CliResult help = run({"--help"});
  EXPECT_EQ(help.code, kExitOk);
  EXPECT_NE(help.out.find("gen-dataset"), std::string::npos);
}

TEST(Cli, EmptySourceDirectory) {
  TempDir d("cli_empty");
  std::filesystem::create_directories(d / "src");
  const CliResult r = run({"gen-dataset", "--kind", "lca", "--sources", (d / "src").string(), "--out", (d / "out").string()});
  EXPECT_EQ(r.code, kExitError);
  EXPECT_NE(r.err.find("no source images"), std::string::npos);
  EXPECT_FALSE(std::filesystem::exists(d / "out"));
}

TEST(Cli, TrainOnCorruptManifestNamesTheLine) {
  TempDir d("cli_corrupt");
  std::ofstream(d / "manifest.jsonl")
      << R"({"counts":{"skipped":0,"test":0,"total":1,"train":1,"val":0},"kind":"lca","seed":0,"version":1})" << "\n"
      << "{not json\n";
  const CliResult r = run({"train", "--manifest", (d / "manifest.jsonl").string(), "--out", (d / "m.rkds").string()});
  EXPECT_EQ(r.code, kExitError);
  EXPECT_NE(r.err.find("line 2"), std::string::npos) << r.err;
}

TEST(Cli, GenSetAndEvalImages) {
  TempDir d("cli_set");
  CliResult r = run({"gen-set", "--kind", "lca", "--levels", "0,1.5,3", "--size", "160", "--seed", "2", "--out",
               (d / "set").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  for (const char* name : {"scene_level0.png", "scene_level1.5.png", "scene_level3.png"}) {
    EXPECT_TRUE(std::filesystem::exists(d / "set" / name)) << name;
  }
  const ImageRGB base = generate_scene(160, 2, kLcaSceneSaturation);
  EXPECT_EQ(load_image(d / "set" / "scene_level0.png"), quantized(base));
  EXPECT_EQ(load_image(d / "set" / "scene_level3.png"), quantized(simulate_lca(base, 3.0, Diagonal::Main)));

  save_checkpoint(init_model(kSmallV1, 1), d / "m.rkds");
  r = run({"eval-pairs", "--checkpoint", (d / "m.rkds").string(), "--images", (d / "set").string(), "--trials",
           "150", "--crop", "150", "--csv", (d / "mc.csv").string()});
  ASSERT_EQ(r.code, 0) << r.err;
  const std::string csv = test::read_bytes(d / "mc.csv");
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 153);
  EXPECT_NE(csv.find("\r\nsummary,tp_percent,"), std::string::npos);
  EXPECT_NE(csv.find("\r\nsummary,skipped,"), std::string::npos);

  // a single image cannot form a pair
  std::filesystem::remove(d / "set" / "scene_level0.png");
  std::filesystem::remove(d / "set" / "scene_level1.5.png");
  r = run({"eval-pairs", "--checkpoint", (d / "m.rkds").string(), "--images", (d / "set").string()});
  EXPECT_EQ(r.code, kExitError);
  EXPECT_NE(r.err.find("InsufficientImages"), std::string::npos) << r.err;

  r = run({"eval-pairs", "--checkpoint", (d / "m.rkds").string()});
  EXPECT_EQ(r.code, kExitUsage);
}

TEST(Cli, RankSet) {
  TempDir d("cli_rank");
  save_checkpoint(init_model(kSmallV1, 1), d / "m.rkds");
  const ImageRGB img = test::random_quantized_image(64, 64, 3);
  save_image(img, d / "a.png");
  save_image(img, d / "b.png");
  CliResult r = run({"rank-set", "--checkpoint", (d / "m.rkds").string(), (d / "a.png").string(), (d / "b.png").string()});
  EXPECT_EQ(r.code, kExitOk) << r.err;
  EXPECT_NE(r.out.find("tie: all images are identical"), std::string::npos);

  save_image(test::random_quantized_image(64, 48, 4), d / "c.png");
  r = run({"rank-set", "--checkpoint", (d / "m.rkds").string(), (d / "a.png").string(), (d / "c.png").string()});
  EXPECT_EQ(r.code, kExitError);
  EXPECT_NE(r.err.find("DimensionMismatch"), std::string::npos) << r.err;

  ImageRGB shifted = simulate_lca(img, 2.0, Diagonal::Main);
  save_image(shifted, d / "s.png");
  r = run({"rank-set", "--checkpoint", (d / "m.rkds").string(), (d / "a.png").string(), (d / "s.png").string(),
           "--expected", "1,2", "--csv", (d / "r.csv").string(), "--svg", (d / "r.svg").string()});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  EXPECT_NE(r.out.find("spearman rho vs expected: "), std::string::npos);
  const std::string csv = test::read_bytes(d / "r.csv");
  EXPECT_EQ(csv.substr(0, csv.find("\r\n")), "image,rank,expected_rank");

  r = run({"rank-set", "--checkpoint", (d / "m.rkds").string(), (d / "a.png").string()});
  EXPECT_EQ(r.code, kExitUsage);
}

TEST(ParseLevelFromName, Suffixes) {
  EXPECT_EQ(parse_level_from_name("scene_level3"), 3.0);
  EXPECT_EQ(parse_level_from_name("a_b_level2.5"), 2.5);
  EXPECT_EQ(parse_level_from_name("x_level0"), 0.0);
  EXPECT_FALSE(parse_level_from_name("scene3").has_value());
  EXPECT_FALSE(parse_level_from_name("scene_level").has_value());
  EXPECT_FALSE(parse_level_from_name("scene_level3.").has_value());
  EXPECT_FALSE(parse_level_from_name("scene_level-1").has_value());
}

}  // namespace
}  // namespace rankdist
