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

#include "safefl/threat.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>

namespace safefl::threat {
namespace {

using Objective = std::function<double(std::span<const double>)>;

// Projected descent on a box using central-difference gradients and a
// backtracking step along the normalized gradient.
InversionResult FiniteDifferenceDescent(const Objective& objective,
                                        std::size_t dim,
                                        const InversionOptions& opts,
                                        std::uint64_t seed) {
  Rng rng(seed);
  std::uniform_real_distribution<double> unif(opts.box_lo, opts.box_hi);
  std::vector<double> x(dim);
  for (auto& v : x) v = unif(rng);
  double fx = objective(x);
  double step = opts.initial_step;
  std::vector<double> grad(dim), probe(dim), trial(dim);
  InversionResult res;
  for (int it = 0; it < opts.iterations; ++it) {
    if (fx < 1e-20) {
      res.converged = true;
      break;
    }
    probe = x;
    for (std::size_t f = 0; f < dim; ++f) {
      const double orig = probe[f];
      probe[f] = orig + opts.fd_step;
      const double up = objective(probe);
      probe[f] = orig - opts.fd_step;
      const double down = objective(probe);
      probe[f] = orig;
      grad[f] = (up - down) / (2.0 * opts.fd_step);
    }
    const double gnorm = Norm2(grad);
    if (gnorm == 0.0) {
      res.converged = true;
      break;
    }
    bool improved = false;
    while (step > 1e-12) {
      for (std::size_t f = 0; f < dim; ++f) {
        trial[f] = std::clamp(x[f] - step * grad[f] / gnorm, opts.box_lo, opts.box_hi);
      }
      const double ft = objective(trial);
      if (ft < fx) {
        x = trial;
        fx = ft;
        step *= 1.5;
        improved = true;
        break;
      }
      step *= 0.5;
    }
    if (!improved) {
      res.converged = true;
      break;
    }
  }
  res.reconstruction = std::move(x);
  res.objective = fx;
  return res;
}

// Credit for predicting `label` with ties among maximal logits split evenly,
// i.e. the expected hit under uniform random tie-breaking.
double PredictionCredit(const learners::Learner& model, std::span<const double> x,
                        int label) {
  const auto z = model.Logits(x);
  const double top = *std::max_element(z.begin(), z.end());
  if (z[label] != top) return 0.0;
  return 1.0 / static_cast<double>(std::count(z.begin(), z.end(), top));
}

std::span<const double> BiasBlock(const ParameterVector& g,
                                  const learners::Learner& learner) {
  return g.span().subspan(learner.output_bias_offset());
}

}  // namespace

std::string ToString(AdversaryKind k) {
  switch (k) {
    case AdversaryKind::kNone:
      return "none";
    case AdversaryKind::kSignFlip:
      return "sign_flip";
    case AdversaryKind::kScale:
      return "scale";
    case AdversaryKind::kBackdoor:
      return "backdoor";
  }
  return "none";
}

AdversaryKind ParseAdversaryKind(const std::string& s) {
  if (s == "none") return AdversaryKind::kNone;
  if (s == "sign_flip" || s == "sign-flip") return AdversaryKind::kSignFlip;
  if (s == "scale") return AdversaryKind::kScale;
  if (s == "backdoor") return AdversaryKind::kBackdoor;
  throw Error(ErrorCode::kConfig, "unknown adversary kind: " + s);
}

void AdversarySpec::Validate(std::size_t num_features) const {
  if (fraction < 0.0 || fraction > 1.0) {
    throw ArgumentError("adversary: fraction outside [0, 1]");
  }
  if (kind == AdversaryKind::kBackdoor) {
    for (std::size_t c : trigger_coords) {
      if (c >= num_features) throw ArgumentError("adversary: trigger coord out of range");
    }
    if (poison_fraction < 0.0 || poison_fraction > 1.0) {
      throw ArgumentError("adversary: poison_fraction outside [0, 1]");
    }
  }
}

int AdversarySpec::NumMalicious(int clients) const {
  if (kind == AdversaryKind::kNone) return 0;
  return static_cast<int>(std::floor(fraction * clients + 1e-9));
}

bool AdversarySpec::IsMalicious(int client_id, int clients) const {
  return client_id >= clients - NumMalicious(clients);
}

ParameterVector ApplyAdversary(const AdversarySpec& spec,
                               const ParameterVector& update) {
  ParameterVector out = update;
  switch (spec.kind) {
    case AdversaryKind::kSignFlip:
      for (auto& v : out) v = -v;
      break;
    case AdversaryKind::kScale:
      for (auto& v : out) v *= spec.scale_factor;
      break;
    default:
      break;
  }
  return out;
}

quantizer::BinarizedUpdate ApplyAdversary(
    const AdversarySpec& spec, const quantizer::BinarizedUpdate& update) {
  quantizer::BinarizedUpdate out = update;
  // A +-1 payload has no magnitude to scale; only the sign flip applies.
  if (spec.kind == AdversaryKind::kSignFlip) {
    for (auto& s : out.signs) s = static_cast<std::int8_t>(-s);
  }
  return out;
}

void StampTrigger(const AdversarySpec& spec, std::span<double> x) {
  for (std::size_t c : spec.trigger_coords) x[c] = spec.trigger_value;
}

datasim::Dataset ApplyAdversary(const AdversarySpec& spec,
                                const datasim::Dataset& shard,
                                std::uint64_t seed) {
  if (spec.kind != AdversaryKind::kBackdoor) return shard;
  spec.Validate(shard.num_features);
  datasim::Dataset out = shard;
  std::vector<std::size_t> idx(out.size());
  std::iota(idx.begin(), idx.end(), 0);
  Rng rng(seed);
  std::shuffle(idx.begin(), idx.end(), rng);
  const auto n = static_cast<std::size_t>(
      std::llround(spec.poison_fraction * static_cast<double>(out.size())));
  for (std::size_t i = 0; i < n; ++i) {
    StampTrigger(spec, out.row(idx[i]));
    out.labels[idx[i]] = spec.target_label;
  }
  return out;
}

double Psnr(std::span<const double> x, std::span<const double> x_hat) {
  if (x.size() != x_hat.size()) throw ArgumentError("psnr: length mismatch");
  if (x.empty()) throw ArgumentError("psnr: empty input");
  double mse = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double d = x[i] - x_hat[i];
    mse += d * d;
  }
  mse /= static_cast<double>(x.size());
  if (mse == 0.0) return kInfinitePsnr;
  return 10.0 * std::log10(1.0 / mse);
}

std::optional<int> InferLabel(std::span<const double> bias_grad) {
  std::optional<int> label;
  for (std::size_t c = 0; c < bias_grad.size(); ++c) {
    if (bias_grad[c] < 0.0) {
      if (label) return std::nullopt;
      label = static_cast<int>(c);
    }
  }
  return label;
}

InversionResult InvertGradient(const ParameterVector& observed,
                               const learners::Learner& learner,
                               const InversionOptions& opts, std::uint64_t seed) {
  if (observed.size() != learner.num_params()) {
    throw ArgumentError("invert_gradient: observation length mismatch");
  }
  const std::optional<int> label = InferLabel(BiasBlock(observed, learner));
  const int y = label.value_or(0);
  const Objective objective = [&](std::span<const double> x) {
    const ParameterVector g = learner.SampleGrad(x, y);
    double s = 0.0;
    for (std::size_t j = 0; j < g.size(); ++j) {
      const double d = g[j] - observed[j];
      s += d * d;
    }
    return s;
  };
  InversionResult res =
      FiniteDifferenceDescent(objective, learner.dims().features, opts, seed);
  res.label = label;
  return res;
}

InversionResult InvertGradient(const quantizer::BinarizedUpdate& observed,
                               const learners::Learner& learner,
                               const InversionOptions& opts, std::uint64_t seed) {
  if (observed.size() != learner.num_params()) {
    throw ArgumentError("invert_gradient: observation length mismatch");
  }
  // The pattern points along the update, i.e. against the gradient.
  const ParameterVector pattern = observed.ToVector();
  std::vector<double> as_grad(learner.dims().classes);
  for (std::size_t c = 0; c < as_grad.size(); ++c) {
    as_grad[c] = -pattern[learner.output_bias_offset() + c];
  }
  const std::optional<int> label = InferLabel(as_grad);
  const int y = label.value_or(static_cast<int>(
      std::min_element(as_grad.begin(), as_grad.end()) - as_grad.begin()));
  const double pattern_norm = Norm2(pattern.span());
  const Objective objective = [&](std::span<const double> x) {
    const ParameterVector g = learner.SampleGrad(x, y);
    const double gn = Norm2(g.span());
    if (gn == 0.0) return 2.0;
    return 1.0 + Dot(g.span(), pattern.span()) / (gn * pattern_norm);
  };
  InversionResult res =
      FiniteDifferenceDescent(objective, learner.dims().features, opts, seed);
  res.label = label;
  return res;
}

std::optional<std::vector<double>> AnalyticLogRegInversion(
    const ParameterVector& grad, const learners::ModelDims& dims) {
  const std::size_t F = dims.features;
  const std::size_t C = dims.classes;
  if (grad.size() != F * C + C) return std::nullopt;
  std::size_t best = C;
  double best_mag = 0.0;
  for (std::size_t c = 0; c < C; ++c) {
    const double mag = std::fabs(grad[F * C + c]);
    if (mag > best_mag) {
      best_mag = mag;
      best = c;
    }
  }
  if (best == C) return std::nullopt;
  std::vector<double> x(F);
  for (std::size_t f = 0; f < F; ++f) x[f] = grad[best * F + f] / grad[F * C + best];
  return x;
}

ThreatOutcome MeasureAsr(const learners::Learner& model, const AdversarySpec& spec,
                         const datasim::Dataset& test) {
  ThreatOutcome out;
  if (test.empty()) return out;
  double correct = 0.0, hits = 0.0;
  std::size_t stamped = 0;
  std::vector<double> x(test.num_features);
  for (std::size_t i = 0; i < test.size(); ++i) {
    correct += PredictionCredit(model, test.row(i), test.labels[i]);
    if (test.labels[i] == spec.target_label) continue;
    const auto row = test.row(i);
    std::copy(row.begin(), row.end(), x.begin());
    StampTrigger(spec, x);
    ++stamped;
    hits += PredictionCredit(model, x, spec.target_label);
  }
  out.clean_acc = correct / static_cast<double>(test.size());
  out.asr = stamped ? hits / static_cast<double>(stamped) : 0.0;
  return out;
}

}  // namespace safefl::threat
