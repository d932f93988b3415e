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

#include "safefl/quantizer.hpp"

#include <algorithm>
#include <cmath>

namespace safefl::quantizer {

std::string ToString(ThresholdVariant v) {
  switch (v) {
    case ThresholdVariant::kAbsMedian:
      return "abs-median";
    case ThresholdVariant::kSignedMedian:
      return "signed-median";
    case ThresholdVariant::kZero:
      return "zero";
  }
  return "abs-median";
}

ThresholdVariant ParseVariant(const std::string& s) {
  if (s == "abs-median" || s == "abs_median") return ThresholdVariant::kAbsMedian;
  if (s == "signed-median" || s == "signed_median")
    return ThresholdVariant::kSignedMedian;
  if (s == "zero") return ThresholdVariant::kZero;
  throw Error(ErrorCode::kConfig, "unknown threshold variant: " + s);
}

ParameterVector BinarizedUpdate::ToVector() const {
  ParameterVector v(signs.size());
  for (std::size_t j = 0; j < signs.size(); ++j) v[j] = signs[j];
  return v;
}

double Median(std::span<const double> values) {
  if (values.empty()) throw ArgumentError("median of empty vector");
  std::vector<double> tmp(values.begin(), values.end());
  const std::size_t mid = tmp.size() / 2;
  std::nth_element(tmp.begin(), tmp.begin() + mid, tmp.end());
  const double upper = tmp[mid];
  if (tmp.size() % 2 == 1) return upper;
  const double lower = *std::max_element(tmp.begin(), tmp.begin() + mid);
  return 0.5 * (lower + upper);
}

BinarizedUpdate Smartify(const ParameterVector& delta,
                         ThresholdVariant variant) {
  if (delta.empty()) throw ArgumentError("smartify: empty vector");
  if (!delta.AllFinite()) throw ArgumentError("smartify: non-finite input");
  BinarizedUpdate out;
  out.variant = variant;
  switch (variant) {
    case ThresholdVariant::kAbsMedian: {
      std::vector<double> mags(delta.size());
      std::transform(delta.begin(), delta.end(), mags.begin(),
                     [](double x) { return std::fabs(x); });
      out.threshold = Median(mags);
      break;
    }
    case ThresholdVariant::kSignedMedian:
      out.threshold = Median(delta.span());
      break;
    case ThresholdVariant::kZero:
      out.threshold = 0.0;
      break;
  }
  out.signs.resize(delta.size());
  for (std::size_t j = 0; j < delta.size(); ++j) {
    out.signs[j] = delta[j] >= out.threshold ? 1 : -1;
  }
  return out;
}

ParameterVector QsgdResult::Dequantize() const {
  ParameterVector v(levels.size());
  if (num_levels == 0) return v;
  for (std::size_t j = 0; j < levels.size(); ++j) {
    v[j] = scale * static_cast<double>(levels[j]) / num_levels;
  }
  return v;
}

QsgdResult QsgdQuantize(const ParameterVector& g, int levels,
                        std::uint64_t seed) {
  if (levels < 1) throw ArgumentError("qsgd: levels must be >= 1");
  QsgdResult out;
  out.num_levels = levels;
  out.levels.assign(g.size(), 0);
  out.scale = Norm2(g.span());
  if (out.scale == 0.0) return out;
  Rng rng(seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  for (std::size_t j = 0; j < g.size(); ++j) {
    const double r = std::fabs(g[j]) / out.scale * levels;
    double lo = std::floor(r);
    const double frac = r - lo;
    int level = static_cast<int>(lo);
    // Always draw so the stream position does not depend on the data.
    const double u = unif(rng);
    if (frac > 0.0 && u < frac) ++level;
    out.levels[j] = g[j] < 0 ? -level : level;
  }
  return out;
}

ParameterVector TernGradResult::Dequantize() const {
  ParameterVector v(ternary.size());
  for (std::size_t j = 0; j < ternary.size(); ++j) v[j] = scale * ternary[j];
  return v;
}

TernGradResult TernGradQuantize(const ParameterVector& g, std::uint64_t seed) {
  TernGradResult out;
  out.ternary.assign(g.size(), 0);
  for (double x : g) out.scale = std::max(out.scale, std::fabs(x));
  if (out.scale == 0.0) return out;
  Rng rng(seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  for (std::size_t j = 0; j < g.size(); ++j) {
    const double p = std::fabs(g[j]) / out.scale;
    const double u = unif(rng);
    if (g[j] != 0.0 && u < p) out.ternary[j] = g[j] > 0 ? 1 : -1;
  }
  return out;
}

AlignmentReport CosineAlignment(const ParameterVector& g,
                                const ParameterVector& g_tilde,
                                const std::optional<DescentProbe>& probe) {
  if (g.size() != g_tilde.size()) {
    throw ArgumentError("cosine_alignment: length mismatch");
  }
  AlignmentReport rep;
  rep.grad_norm = Norm2(g.span());
  rep.quantized_norm = Norm2(g_tilde.span());
  const double inner = Dot(g.span(), g_tilde.span());
  if (rep.grad_norm > 0.0 && rep.quantized_norm > 0.0) {
    rep.gamma = std::clamp(inner / (rep.grad_norm * rep.quantized_norm), -1.0, 1.0);
  }
  if (probe && rep.gamma) {
    const double eta = probe->step_size;
    const double gamma = probe->gamma_bound.value_or(*rep.gamma);
    const double q2 = rep.quantized_norm * rep.quantized_norm;
    rep.descent_lhs = probe->loss_after;
    rep.descent_rhs = probe->loss_before -
                      eta * gamma * rep.grad_norm * rep.grad_norm +
                      0.5 * probe->smoothness * eta * eta * q2;
    if (eta > 0.0 && q2 > 0.0) {
      rep.smoothness_estimate =
          2.0 * (probe->loss_after - probe->loss_before + eta * inner) /
          (eta * eta * q2);
    }
  }
  return rep;
}

std::uint64_t PayloadBits(std::uint64_t d, PayloadScheme scheme,
                          unsigned key_bits) {
  if (d == 0) throw ArgumentError("payload_bits: d must be >= 1");
  switch (scheme) {
    case PayloadScheme::kFull32:
      return 32 * d;
    case PayloadScheme::kBinarized:
      return d;
    case PayloadScheme::kCiphertext:
      return 2ULL * key_bits * d;
  }
  return 0;
}

}  // namespace safefl::quantizer
