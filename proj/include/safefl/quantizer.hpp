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

#ifndef SAFEFL_QUANTIZER_HPP_
#define SAFEFL_QUANTIZER_HPP_

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "safefl/common.hpp"

namespace safefl::quantizer {

enum class ThresholdVariant {
  kAbsMedian,     // theta = median(|delta|), the default
  kSignedMedian,  // tau = median(delta)
  kZero,          // signSGD
};

std::string ToString(ThresholdVariant v);
ThresholdVariant ParseVariant(const std::string& s);

struct BinarizedUpdate {
  std::vector<std::int8_t> signs;  // each entry is -1 or +1
  double threshold = 0.0;
  ThresholdVariant variant = ThresholdVariant::kAbsMedian;

  std::size_t size() const noexcept { return signs.size(); }
  ParameterVector ToVector() const;
};

// Median with the even-length convention: midpoint of the middle pair.
double Median(std::span<const double> values);

// Maps coordinate j to +1 iff delta[j] >= threshold, else -1.
BinarizedUpdate Smartify(const ParameterVector& delta,
                         ThresholdVariant variant = ThresholdVariant::kAbsMedian);

struct QsgdResult {
  std::vector<int> levels;  // signed level index in [-s, s]
  int num_levels = 0;
  double scale = 0.0;  // ||g||_2
  ParameterVector Dequantize() const;
};

QsgdResult QsgdQuantize(const ParameterVector& g, int levels,
                        std::uint64_t seed);

struct TernGradResult {
  std::vector<std::int8_t> ternary;  // {-1, 0, +1}
  double scale = 0.0;                // max |g_j|
  ParameterVector Dequantize() const;
};

TernGradResult TernGradQuantize(const ParameterVector& g, std::uint64_t seed);

// Inputs for evaluating the descent inequality
//   f(W_{t+1}) <= f(W_t) - eta*gamma*||g||^2 + (L*eta^2/2)*||g~||^2.
struct DescentProbe {
  double step_size = 0.0;
  double smoothness = 0.0;  // L
  double loss_before = 0.0;
  double loss_after = 0.0;
  // Lower bound used for gamma in the inequality; the measured cosine when
  // absent.
  std::optional<double> gamma_bound;
};

struct AlignmentReport {
  std::optional<double> gamma;  // absent when either norm is zero
  double grad_norm = 0.0;
  double quantized_norm = 0.0;
  std::optional<double> descent_lhs;
  std::optional<double> descent_rhs;
  // Empirical L along the step: 2*(f1 - f0 + eta<g, g~>) / (eta^2 ||g~||^2).
  std::optional<double> smoothness_estimate;

  bool DescentHolds() const {
    return descent_lhs && descent_rhs && *descent_lhs <= *descent_rhs;
  }
};

AlignmentReport CosineAlignment(const ParameterVector& g,
                                const ParameterVector& g_tilde,
                                const std::optional<DescentProbe>& probe = {});

enum class PayloadScheme { kFull32, kBinarized, kCiphertext };

// full32: 32*d; binarized: d; ciphertext(k): 2*k*d.
std::uint64_t PayloadBits(std::uint64_t d, PayloadScheme scheme,
                          unsigned key_bits = 0);

}  // namespace safefl::quantizer

#endif  // SAFEFL_QUANTIZER_HPP_
