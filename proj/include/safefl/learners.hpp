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

#ifndef SAFEFL_LEARNERS_HPP_
#define SAFEFL_LEARNERS_HPP_

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "safefl/common.hpp"
#include "safefl/datasim.hpp"

namespace safefl::learners {

enum class ModelKind { kLogReg, kMlp };

std::string ToString(ModelKind k);
ModelKind ParseModelKind(const std::string& s);

struct ModelDims {
  std::size_t features = 0;
  int classes = 0;
  std::size_t hidden = 0;  // mlp only
};

// Numerically stable softmax.
std::vector<double> Softmax(std::span<const double> logits);

// Multinomial logistic regression or a one-hidden-layer tanh network trained
// with mean cross-entropy. Weights are stored flat:
//   logreg: W (C x F), b (C)
//   mlp:    W1 (H x F), b1 (H), W2 (C x H), b2 (C)
// so the output-layer bias is always the trailing C coordinates.
class Learner {
 public:
  // Zero-initialized logistic regression.
  static Learner LogReg(std::size_t features, int classes);
  // Uniform(+-1/sqrt(fan_in)) initialization, zero biases.
  static Learner Mlp(std::size_t features, std::size_t hidden, int classes,
                     std::uint64_t seed);

  ModelKind kind() const noexcept { return kind_; }
  const ModelDims& dims() const noexcept { return dims_; }
  std::size_t num_params() const noexcept { return weights_.size(); }
  const ParameterVector& weights() const noexcept { return weights_; }
  void set_weights(ParameterVector w);

  std::vector<double> Logits(std::span<const double> x) const;
  std::vector<double> Probabilities(std::span<const double> x) const;
  int Predict(std::span<const double> x) const;

  // Mean cross-entropy over the selected rows (all rows when empty).
  double Loss(const datasim::Dataset& data,
              std::span<const std::size_t> rows = {}) const;
  double SampleLoss(std::span<const double> x, int y) const;

  // Analytic gradient of the mean cross-entropy w.r.t. the weights.
  ParameterVector Grad(const datasim::Dataset& data,
                       std::span<const std::size_t> rows = {}) const;
  ParameterVector SampleGrad(std::span<const double> x, int y) const;
  // Gradient of the per-sample loss w.r.t. the input features.
  std::vector<double> InputGrad(std::span<const double> x, int y) const;

  // Offset of the trailing output-bias block.
  std::size_t output_bias_offset() const noexcept {
    return weights_.size() - static_cast<std::size_t>(dims_.classes);
  }

 private:
  Learner(ModelKind kind, ModelDims dims);
  void CheckInput(std::span<const double> x) const;
  // Accumulates scale * dLoss/dW for one sample into `grad`, and optionally
  // the input gradient into `dx`.
  void Backprop(std::span<const double> x, int y, double scale,
                std::span<double> grad, std::span<double> dx) const;

  ModelKind kind_;
  ModelDims dims_;
  ParameterVector weights_;
};

enum class Optimizer { kSgd, kAdam };

struct AdvConfig {
  double epsilon = 0.01;
  int steps = 7;
  double lambda_adv = 0.3;
  // Inner step; 2.5 * epsilon / steps when not positive.
  double step_size = 0.0;
  double box_lo = 0.0;
  double box_hi = 1.0;

  double EffectiveStep() const;
  void Validate() const;
};

struct TrainOptions {
  int epochs = 5;
  std::size_t batch_size = 32;
  double learning_rate = 1e-3;
  double prox_mu = 0.0;
  Optimizer optimizer = Optimizer::kSgd;
};

// Mini-batch training from the learner's current weights. The proximal term
// prox_mu/2 * ||W - anchor||^2 is added when prox_mu > 0. Throws
// Error(kDivergence) on a non-finite loss.
ParameterVector LocalTrain(const Learner& learner, const datasim::Dataset& shard,
                           const TrainOptions& opts, const ParameterVector& anchor,
                           std::uint64_t seed);

// As LocalTrain with each batch loss mixed as (1-l)*L(x) + l*L(x_adv), where
// x_adv is regenerated per batch by PgdExample.
ParameterVector AdvLocalTrain(const Learner& learner,
                              const datasim::Dataset& shard,
                              const TrainOptions& opts, const AdvConfig& adv,
                              const ParameterVector& anchor, std::uint64_t seed);

// L-infinity PGD loss ascent starting at x (no random start).
std::vector<double> PgdExample(const Learner& learner, std::span<const double> x,
                               int y, const AdvConfig& cfg);

struct SmoteResult {
  datasim::Dataset data;
  std::vector<std::string> warnings;
};

// Upsamples every class to the majority count with x + u * (x_nn - x).
// Synthetic rows are appended after the original rows.
SmoteResult SmoteBalance(const datasim::Dataset& shard, int k_neighbors,
                         std::uint64_t seed);

struct CalibrationModel {
  double temperature = 1.0;
  std::vector<std::string> warnings;

  std::vector<double> Calibrate(std::span<const double> logits) const;
};

// Mean NLL of softmax(z / T); logits are row-major N x C.
double TemperatureNll(std::span<const double> logits, std::span<const int> labels,
                      int classes, double temperature);

// Golden-section search for T on [0.05, 20] with tolerance 1e-4.
CalibrationModel FitTemperature(std::span<const double> logits,
                                std::span<const int> labels, int classes);

struct EvalResult {
  double accuracy = 0.0;
  double macro_f1 = 0.0;
  std::vector<double> per_class_f1;
};

EvalResult Evaluate(const Learner& learner, const datasim::Dataset& data);

}  // namespace safefl::learners

#endif  // SAFEFL_LEARNERS_HPP_
