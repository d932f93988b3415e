//
// Copyright 2026 The safefl Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
//

#include "safefl/experiment.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

namespace safefl::experiment {
namespace {

namespace fs = std::filesystem;

constexpr const char* kTiny = R"({
  "data": {"classes": 3, "features": 6, "per_class": 30, "test_per_class": 5},
  "K": 3, "rounds": 3, "key_bits": 256, "alpha": 0.01,
  "train": {"epochs": 1, "lr": 0.05},
  "inversion": {"trials": 2, "iterations": 30},
  "seeds": [4]
})";

std::string Slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string ConfigErrorMessage(const std::string& json) {
  try {
    ParseConfig(json);
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kConfig);
    return e.what();
  }
  return "";
}

TEST(ConfigTest, DefaultsFollowMode) {
  const auto secure = ParseConfig("{}");
  EXPECT_EQ(secure.sim.alpha, 1e-3);
  EXPECT_EQ(secure.sim.momentum, 0.9);
  EXPECT_EQ(secure.sim.partition.clients, 50);
  const auto mean = ParseConfig(R"({"mode": "mean"})");
  EXPECT_EQ(mean.sim.alpha, 1.0);
  EXPECT_EQ(mean.sim.momentum, 0.0);
  auto overridden = ParseConfig("{}");
  ApplyOverrides(overridden, Overrides{9, "mean"});
  EXPECT_EQ(overridden.sim.alpha, 1.0);
  EXPECT_EQ(overridden.seeds, std::vector<std::uint64_t>{9});
  const auto explicit_alpha = ParseConfig(R"({"mode": "mean", "alpha": 0.5})");
  EXPECT_EQ(explicit_alpha.sim.alpha, 0.5);
}

TEST(ConfigTest, DefaultTriggerIsLastThreeFeatures) {
  const auto cfg = ParseConfig(R"({"data": {"features": 10}})");
  EXPECT_EQ(cfg.sim.attack.trigger_coords, (std::vector<std::size_t>{7, 8, 9}));
}

TEST(ConfigTest, ErrorsNameTheField) {
  EXPECT_NE(ConfigErrorMessage(R"({"K": "ten"})").find("'K'"), std::string::npos);
  EXPECT_NE(ConfigErrorMessage(R"({"train": {"lr": "x"}})").find("train.lr"), std::string::npos);
  EXPECT_NE(ConfigErrorMessage(R"({"bogus": 1})").find("bogus"), std::string::npos);
  EXPECT_NE(ConfigErrorMessage(R"({"key_bits": 300})").find("key_bits"), std::string::npos);
  EXPECT_NE(ConfigErrorMessage(R"({"partition": {"scheme": "x"}})").find("partition.scheme"),
            std::string::npos);
  EXPECT_NE(ConfigErrorMessage("{not json").find("JSON"), std::string::npos);
  EXPECT_NE(ConfigErrorMessage(R"({"momentum": 1.0})").find("momentum"), std::string::npos);
}

TEST(ConfigTest, HashIgnoresSeedListButNotSettings) {
  const auto a = ParseConfig(R"({"seeds": [1]})");
  const auto b = ParseConfig(R"({"seeds": [2, 3]})");
  const auto c = ParseConfig(R"({"K": 10})");
  EXPECT_EQ(a.Hash(), b.Hash());
  EXPECT_NE(a.Hash(), c.Hash());
  EXPECT_EQ(a.Hash().size(), 16u);
}

TEST(RoundsToAccuracyTest, FirstReachingRound) {
  std::vector<protocol::RoundReport> r(3);
  r[0].round = 1;
  r[0].test_acc = 0.5;
  r[1].round = 2;
  r[1].test_acc = 0.96;
  r[2].round = 3;
  r[2].test_acc = 0.99;
  EXPECT_EQ(RoundsToAccuracy(r, 0.95), 2);
  EXPECT_EQ(RoundsToAccuracy(r, 0.98), 3);
  EXPECT_FALSE(RoundsToAccuracy(r, 0.995));
}

TEST(CsvTest, HeaderIsStable) {
  const std::string csv = FormatRoundCsv({});
  EXPECT_EQ(csv, "round,acc,macro_f1,logical_bits_cum,wire_bits_cum,gamma_mean,asr,notes\n");
}

class CommandTest : public ::testing::Test {
 protected:
  void SetUp() override {
    root_ = fs::path(::testing::TempDir()) /
            ("safefl_cmd_" + std::string(::testing::UnitTest::GetInstance()
                                             ->current_test_info()
                                             ->name()));
    fs::remove_all(root_);
  }
  void TearDown() override { fs::remove_all(root_); }
  fs::path root_;
};

TEST_F(CommandTest, EverySubcommandSucceedsAndIsByteDeterministic) {
  const std::string claims = (root_ / "claims.csv").string();
  fs::create_directories(root_);
  std::ofstream(claims) << "0.9;0.7,0.8\n0.1,0.9\n";
  const std::string cfg = std::string(kTiny).insert(1, "\"guard\": {\"input\": \"" + claims +
                                                           "\"},");
  for (const char* cmd : kSubcommands) {
    const auto a = RunCommand(cmd, cfg, (root_ / "a").string(), {});
    const auto b = RunCommand(cmd, cfg, (root_ / "b").string(), {});
    ASSERT_EQ(a.code, ExitCode::kOk) << cmd << ": " << a.message;
    ASSERT_FALSE(a.artifacts.empty()) << cmd;
    ASSERT_EQ(a.artifacts.size(), b.artifacts.size());
    for (std::size_t i = 0; i < a.artifacts.size(); ++i) {
      EXPECT_EQ(Slurp(a.artifacts[i]), Slurp(b.artifacts[i])) << a.artifacts[i];
    }
  }
}

TEST_F(CommandTest, AblationFullRowMatchesSimulate) {
  const auto sim = RunCommand("simulate", kTiny, root_.string(), {});
  const auto abl = RunCommand("ablate", kTiny, root_.string(), {});
  ASSERT_EQ(sim.code, ExitCode::kOk);
  ASSERT_EQ(abl.code, ExitCode::kOk);
  const auto cfg = ParseConfig(kTiny);
  const fs::path dir = root_ / cfg.Hash() / "seed-4";
  const auto summary = Slurp(dir / "summary.json");
  const auto ablation = Slurp(dir / "ablation.csv");
  const auto rounds = Slurp(dir / "rounds.csv");
  const auto last = rounds.substr(rounds.rfind('\n', rounds.size() - 2) + 1);
  const auto acc = last.substr(last.find(',') + 1, last.find(',', 2) - last.find(',') - 1);
  EXPECT_NE(ablation.find("full,none," + acc + ","), std::string::npos) << ablation;
  EXPECT_NE(ablation.find("fedavg,all,"), std::string::npos);
  EXPECT_NE(summary.find("\"final_test_acc\""), std::string::npos);
}

TEST_F(CommandTest, ExitCodes) {
  EXPECT_EQ(RunCommand("simulate", R"({"K": -1})", root_.string(), {}).code, ExitCode::kConfig);
  EXPECT_EQ(RunCommand("frobnicate", kTiny, root_.string(), {}).code, ExitCode::kConfig);
  EXPECT_EQ(RunCommand("guard-score", kTiny, root_.string(), {}).code, ExitCode::kConfig);
  const std::string diverge = R"({"K": 2, "rounds": 3, "mode": "mean",
    "toggles": {"encryption": false, "smartification": false},
    "data": {"per_class": 10, "test_per_class": 2}, "train": {"lr": 1e308}})";
  const auto res = RunCommand("simulate", diverge, root_.string(), {});
  EXPECT_EQ(res.code, ExitCode::kDivergence);
  EXPECT_NE(res.message.find("diverged"), std::string::npos);
}

TEST_F(CommandTest, CompressionTable) {
  const auto res = RunCommand("bench-compression", R"({"d": [35, 1000]})", root_.string(), {});
  ASSERT_EQ(res.code, ExitCode::kOk);
  EXPECT_EQ(Slurp(res.artifacts[0]),
            "d,full32_bits,binarized_bits,ratio,ciphertext_bits,key_bits\n"
            "35,1120,35,32,143360,2048\n"
            "1000,32000,1000,32,4096000,2048\n");
}

}  // namespace
}  // namespace safefl::experiment
