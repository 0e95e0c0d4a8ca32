// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <json.hpp>

#include "cli.hpp"
#include "mvse/checkpoint.hpp"
#include "mvse/csv.hpp"
#include "mvse/dataset.hpp"

namespace fs = std::filesystem;

namespace mvse {
namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    dir_ = fs::temp_directory_path() / (std::string("mvse_cli_") + info->name());
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string p(const std::string& name) const { return (dir_ / name).string(); }

  int run(std::vector<std::string> args) const { return cli::run(args); }

  // Small synthetic dataset and a quick two-epoch model trained on it.
  void make_world(std::size_t count = 80) {
    ASSERT_EQ(run({"synth", "--seed", "3", "--count", std::to_string(count), "--features", "6", "--out", p("w.jsonl")}),
              0);
  }
  void write_config(const std::string& name, std::size_t gs_dim, std::size_t osm_dim) {
    nlohmann::json j = {{"sh_degree", 3},        {"siren_widths", {8}}, {"embed_dim", 8},
                        {"gs_dim", gs_dim},      {"osm_dim", osm_dim},  {"gs_hidden", 4},
                        {"osm_filters", {2, 2}}, {"fusion_width", 4},   {"epochs", 2},
                        {"batch_size", 16},      {"learning_rate", 1e-3}};
    std::ofstream(p(name)) << j.dump();
  }
  void write_coords(const std::string& name, int rows) {
    std::ofstream f(p(name));
    f << "id,lon,lat\n";
    for (int i = 0; i < rows; ++i) f << "c" << i << ',' << i << ',' << 45 + i << '\n';
  }

  fs::path dir_;
};

TEST_F(CliTest, SynthIsDeterministic) {
  ASSERT_EQ(run({"synth", "--seed", "4", "--count", "30", "--out", p("a.jsonl")}), 0);
  ASSERT_EQ(run({"synth", "--seed", "4", "--count", "30", "--out", p("b.jsonl")}), 0);
  EXPECT_EQ(slurp(p("a.jsonl")), slurp(p("b.jsonl")));
  EXPECT_EQ(load_dataset(p("a.jsonl")).size(), 30u);
  EXPECT_TRUE(fs::exists(p("a.jsonl.manifest")));
  EXPECT_NE(run({"synth", "--count", "5", "--out", p("c.jsonl")}), 0);
  EXPECT_NE(run({"synth"}), 0);
  EXPECT_NE(run({"frobnicate"}), 0);
}

TEST_F(CliTest, TrainTwiceGivesIdenticalCheckpoints) {
  make_world();
  write_config("cfg.json", 4, 4);
  ASSERT_EQ(run({"train", "--data", p("w.jsonl"), "--config", p("cfg.json"), "--out", p("a.ckpt")}), 0);
  ASSERT_EQ(run({"train", "--data", p("w.jsonl"), "--config", p("cfg.json"), "--out", p("b.ckpt")}), 0);
  EXPECT_EQ(slurp(p("a.ckpt")), slurp(p("b.ckpt")));
  EXPECT_TRUE(fs::exists(p("a.ckpt.manifest")));
  const std::string log = slurp(p("a.ckpt.log.jsonl"));
  EXPECT_EQ(std::count(log.begin(), log.end(), '\n'), 2);
  const auto manifest = slurp(p("a.ckpt.manifest"));
  for (const char* key : {"tool_version=", "start=", "end=", "config="})
    EXPECT_NE(manifest.find(key), std::string::npos) << key;
}

TEST_F(CliTest, OsmOnlyDataWithMatchingAndMismatchedPresets) {
  make_world(40);
  auto recs = load_dataset(p("w.jsonl"));
  for (auto& r : recs) r.gs_features.clear();
  save_dataset(p("osm.jsonl"), recs);
  ASSERT_EQ(run({"train", "--data", p("osm.jsonl"), "--config", "EU16_OSM16", "--epochs", "1", "--out", p("o.ckpt")}),
            0);
  EXPECT_EQ(load_checkpoint(p("o.ckpt")).model.config().embed_dim, 16u);
  EXPECT_NE(run({"train", "--data", p("osm.jsonl"), "--config", "EU64_GS64", "--epochs", "1", "--out", p("g.ckpt")}),
            0);
  EXPECT_FALSE(fs::exists(p("g.ckpt")));
}

TEST_F(CliTest, EmbedWritesOneRowPerCoordinate) {
  make_world();
  write_config("cfg.json", 4, 4);
  ASSERT_EQ(run({"train", "--data", p("w.jsonl"), "--config", p("cfg.json"), "--out", p("m.ckpt")}), 0);
  write_coords("one.csv", 1);
  ASSERT_EQ(run({"embed", "--checkpoint", p("m.ckpt"), "--coords", p("one.csv"), "--out", p("e.csv")}), 0);
  const auto t = read_csv(fs::path(p("e.csv")));
  ASSERT_EQ(t.rows.size(), 1u);
  EXPECT_EQ(t.rows[0].size(), 11u);
  EXPECT_TRUE(fs::exists(p("e.csv.manifest")));
}

TEST_F(CliTest, EvalVipAndPdpPipeline) {
  make_world(120);
  write_config("cfg.json", 4, 4);
  ASSERT_EQ(run({"train", "--data", p("w.jsonl"), "--config", p("cfg.json"), "--out", p("m.ckpt")}), 0);
  ASSERT_EQ(run({"eval", "--checkpoint", p("m.ckpt"), "--data", p("w.jsonl"), "--features", "embedding", "--out",
                 p("metrics.json"), "--probe-out", p("probe.json")}),
            0);
  const auto metrics = nlohmann::json::parse(slurp(p("metrics.json")));
  EXPECT_EQ(metrics["label"], "price");
  EXPECT_GT(metrics["test_mse"].get<double>(), 0.0);
  EXPECT_EQ(metrics["train_rows"].get<std::size_t>() + metrics["test_rows"].get<std::size_t>(), 120u);

  ASSERT_EQ(run({"eval", "--data", p("w.jsonl"), "--features", "raw", "--holdout-region", "0", "--out", p("raw.json")}), 0);
  EXPECT_EQ(nlohmann::json::parse(slurp(p("raw.json")))["holdout_region"], 0);

  ASSERT_EQ(run({"vip", "--probe", p("probe.json"), "--checkpoint", p("m.ckpt"), "--data", p("w.jsonl"), "--out",
                 p("vip.json")}),
            0);
  EXPECT_GE(nlohmann::json::parse(slurp(p("vip.json")))["value"].get<double>(), 0.0);

  write_coords("grid.csv", 5);
  ASSERT_EQ(run({"pdp", "--probe", p("probe.json"), "--checkpoint", p("m.ckpt"), "--data", p("w.jsonl"), "--grid",
                 p("grid.csv"), "--out", p("pd.csv")}),
            0);
  const auto pd = read_csv(fs::path(p("pd.csv")));
  EXPECT_EQ(pd.header, (std::vector<std::string>{"lon", "lat", "pd"}));
  EXPECT_EQ(pd.rows.size(), 5u);
  for (const char* f : {"metrics.json", "vip.json", "pd.csv"}) EXPECT_TRUE(fs::exists(p(std::string(f) + ".manifest")));

  // Embedding probes need the checkpoint.
  EXPECT_NE(run({"vip", "--probe", p("probe.json"), "--data", p("w.jsonl"), "--out", p("x.json")}), 0);
}

TEST_F(CliTest, ZeroProbeHasNoImportanceAndFlatDependence) {
  make_world(30);
  cli::ProbeFile probe;
  probe.model.coefficients = {{0.0, 0.0}};
  probe.model.intercept = {1.5};
  probe.label = "price";
  cli::save_probe(p("zero.json"), probe);
  ASSERT_EQ(run({"vip", "--probe", p("zero.json"), "--data", p("w.jsonl"), "--out", p("vip.json")}), 0);
  EXPECT_EQ(nlohmann::json::parse(slurp(p("vip.json")))["value"].get<double>(), 0.0);
  write_coords("grid.csv", 4);
  ASSERT_EQ(run({"pdp", "--probe", p("zero.json"), "--data", p("w.jsonl"), "--grid", p("grid.csv"), "--out",
                 p("pd.csv")}),
            0);
  for (const auto& row : read_csv(fs::path(p("pd.csv"))).rows) EXPECT_EQ(row[2], "1.5");
}

}  // namespace
}  // namespace mvse
