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

#ifndef SAFEFL_EXPERIMENT_HPP_
#define SAFEFL_EXPERIMENT_HPP_

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "safefl/protocol.hpp"

// Experiment configuration, subcommand runners, and artifact emission.
namespace safefl::experiment {

// Ablation switches. Each one is independent of the others.
struct Toggles {
  bool encryption = true;
  bool smartification = true;
  bool smote = false;
  bool dp = false;
  bool adversarial_training = false;
  bool guard = true;
};

struct InversionSettings {
  int trials = 20;
  int iterations = 400;
  // Local SGD steps used to train the attacked model before observation.
  int warmup_rounds = 0;
};

struct GuardSettings {
  std::string input;  // batch csv path
  double tau = 0.55;
};

struct ExperimentConfig {
  protocol::SimulationConfig sim;
  Toggles toggles;
  std::vector<std::uint64_t> seeds = {1};
  std::vector<double> targets = {0.95, 0.98};
  std::vector<std::uint64_t> bench_dims = {35};
  unsigned keygen_bits = 2048;
  InversionSettings inversion;
  GuardSettings guard;
  // Whether alpha/momentum were given explicitly; otherwise they follow the
  // aggregation mode (mean-style modes apply the mean delta directly).
  bool alpha_explicit = false;
  bool momentum_explicit = false;

  // SimulationConfig with toggles folded in for one seed.
  protocol::SimulationConfig Effective(std::uint64_t seed) const;
  // Canonical JSON of the effective configuration (sorted keys).
  std::string CanonicalJson() const;
  // 16 hex digits of FNV-1a over CanonicalJson().
  std::string Hash() const;
};

// Throws Error(kConfig) with the offending field path.
ExperimentConfig ParseConfig(const std::string& json_text);

struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::string> mode;
};

void ApplyOverrides(ExperimentConfig& cfg, const Overrides& o);

// First round (1-based) whose test accuracy reaches `target`.
std::optional<int> RoundsToAccuracy(const std::vector<protocol::RoundReport>& reports,
                                    double target);

// Fixed, versioned CSV header.
inline constexpr const char* kRoundCsvHeader =
    "round,acc,macro_f1,logical_bits_cum,wire_bits_cum,gamma_mean,asr,notes";

std::string FormatRoundCsv(const std::vector<protocol::RoundReport>& reports);
std::string FormatPerClassCsv(const std::vector<protocol::RoundReport>& reports);
std::string SimulationSummaryJson(const ExperimentConfig& cfg, std::uint64_t seed,
                                  const protocol::SimulationResult& result);

struct InversionSummary {
  int trials = 0;
  double full_psnr_mean = 0.0;
  double binarized_psnr_mean = 0.0;
  double full_label_recovery = 0.0;
  double binarized_label_recovery = 0.0;
  int full_infinite = 0;  // exact reconstructions, excluded from the mean
  std::vector<std::vector<double>> truths;
  std::vector<std::vector<double>> full_reconstructions;
  std::vector<std::vector<double>> binarized_reconstructions;
};

// Batch-1 inversion trials against full-precision and smartified updates of
// the configured learner on held-out samples.
InversionSummary RunInversionTrials(const ExperimentConfig& cfg, std::uint64_t seed);

struct PoisonSummary {
  double asr_mean_mode = 0.0;
  double asr_median_mode = 0.0;
  double clean_acc_mean_mode = 0.0;
  double clean_acc_median_mode = 0.0;
};

// Backdoor run under FedAvg mean aggregation and under the configured
// median-style aggregation, same seed and attack.
PoisonSummary RunPoisonComparison(const ExperimentConfig& cfg, std::uint64_t seed);

enum class ExitCode : int { kOk = 0, kConfig = 2, kDivergence = 3, kInternal = 4 };

struct CommandResult {
  ExitCode code = ExitCode::kOk;
  std::string message;
  std::vector<std::string> artifacts;
};

inline constexpr const char* kSubcommands[] = {
    "keygen",        "simulate",          "ablate",     "attack-inversion",
    "attack-poison", "bench-compression", "guard-score"};

// Writes artifacts under out_dir/<config-hash>/seed-<seed>/ (simulate-style
// commands) or out_dir/<config-hash>/ (single-shot commands).
CommandResult RunCommand(const std::string& subcommand, const std::string& config_json,
                         const std::string& out_dir, const Overrides& overrides);

}  // namespace safefl::experiment

#endif  // SAFEFL_EXPERIMENT_HPP_
