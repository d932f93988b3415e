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

#ifndef SAFEFL_GUARD_HPP_
#define SAFEFL_GUARD_HPP_

#include <string>
#include <vector>

namespace safefl::guard {

inline constexpr double kDefaultThreshold = 0.55;

// Entailment scores of one claim against m evidence passages plus the
// calibrated model confidence in the claim.
struct ClaimEvidence {
  std::vector<double> nli_scores;
  double confidence = 1.0;
  double threshold = kDefaultThreshold;

  void Validate() const;
};

enum class Decision { kPass, kAbstainOrRegenerate };

std::string ToString(Decision d);

// confidence * mean(nli_scores). The confidence factor is evidence
// independent, so it is applied once outside the mean.
double FaithScore(const ClaimEvidence& ce);

// Scores at or above tau pass.
Decision GuardDecision(double score, double tau);

struct BatchRow {
  double score = 0.0;
  Decision decision = Decision::kPass;
};

// Input rows: "<s1;s2;...>,<confidence>" with an optional header line
// starting with "nli". Output: header "score,decision" then one row each.
std::vector<BatchRow> ScoreBatch(const std::string& csv_text, double tau);
std::string FormatBatch(const std::vector<BatchRow>& rows);

}  // namespace safefl::guard

#endif  // SAFEFL_GUARD_HPP_
