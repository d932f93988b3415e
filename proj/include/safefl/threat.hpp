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

#ifndef SAFEFL_THREAT_HPP_
#define SAFEFL_THREAT_HPP_

#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "safefl/common.hpp"
#include "safefl/datasim.hpp"
#include "safefl/learners.hpp"
#include "safefl/quantizer.hpp"

namespace safefl::threat {

enum class AdversaryKind { kNone, kSignFlip, kScale, kBackdoor };

std::string ToString(AdversaryKind k);
AdversaryKind ParseAdversaryKind(const std::string& s);

struct AdversarySpec {
  AdversaryKind kind = AdversaryKind::kNone;
  double fraction = 0.0;  // malicious client fraction
  double scale_factor = 1.0;
  std::vector<std::size_t> trigger_coords = {0, 1, 2};
  double trigger_value = 1.0;
  int target_label = 0;
  // Fraction of a malicious shard that gets stamped and relabelled.
  double poison_fraction = 0.5;

  void Validate(std::size_t num_features) const;
  // floor(fraction * K) clients; the highest client ids are malicious.
  int NumMalicious(int clients) const;
  bool IsMalicious(int client_id, int clients) const;
};

ParameterVector ApplyAdversary(const AdversarySpec& spec,
                               const ParameterVector& update);
quantizer::BinarizedUpdate ApplyAdversary(const AdversarySpec& spec,
                                          const quantizer::BinarizedUpdate& update);
// Backdoor: stamps the trigger on a poison_fraction of the shard and sets the
// label of every stamped row to the target. Other kinds return the shard.
datasim::Dataset ApplyAdversary(const AdversarySpec& spec,
                                const datasim::Dataset& shard, std::uint64_t seed);

void StampTrigger(const AdversarySpec& spec, std::span<double> x);

// Sentinel returned when the reconstruction is exact.
inline constexpr double kInfinitePsnr = std::numeric_limits<double>::infinity();

// 10*log10(1/MSE) with MAX = 1.
double Psnr(std::span<const double> x, std::span<const double> x_hat);

// Returns the index of the unique negative coordinate of an output-bias
// gradient block, or nullopt (abstain) when there is not exactly one.
std::optional<int> InferLabel(std::span<const double> bias_grad);

struct InversionOptions {
  int iterations = 400;
  double fd_step = 1e-4;
  double box_lo = 0.0;
  double box_hi = 1.0;
  double initial_step = 0.05;
};

struct InversionResult {
  std::vector<double> reconstruction;
  std::optional<int> label;  // label used for matching
  double objective = 0.0;
  bool converged = false;
};

// Gradient matching against a full-precision observation:
// minimize ||grad L(x_hat, y_hat) - observed||^2 over the domain box with
// projected central-difference descent. The label comes from InferLabel.
InversionResult InvertGradient(const ParameterVector& observed,
                               const learners::Learner& learner,
                               const InversionOptions& opts, std::uint64_t seed);

// Binarized observation: minimize 1 - cos(-grad L(x_hat, y_hat), pattern).
// The pattern is a smartified update, which points against the gradient.
InversionResult InvertGradient(const quantizer::BinarizedUpdate& observed,
                               const learners::Learner& learner,
                               const InversionOptions& opts, std::uint64_t seed);

// Closed-form inversion of a batch-1 logistic-regression gradient:
// x = dW_c / db_c for any class with db_c != 0.
std::optional<std::vector<double>> AnalyticLogRegInversion(
    const ParameterVector& grad, const learners::ModelDims& dims);

struct ThreatOutcome {
  double psnr_db = 0.0;
  double label_recovery_rate = 0.0;
  double asr = 0.0;
  double clean_acc = 0.0;
};

// asr: fraction of trigger-stamped non-target test rows predicted as the
// target; clean_acc: accuracy on the unstamped test set.
ThreatOutcome MeasureAsr(const learners::Learner& model, const AdversarySpec& spec,
                         const datasim::Dataset& test);

}  // namespace safefl::threat

#endif  // SAFEFL_THREAT_HPP_
