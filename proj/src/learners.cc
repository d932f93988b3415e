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

#include "safefl/learners.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace safefl::learners {
namespace {

constexpr double kTempLo = 0.05;
constexpr double kTempHi = 20.0;
constexpr double kTempTol = 1e-4;

std::vector<std::size_t> AllRows(const datasim::Dataset& data,
                                 std::span<const std::size_t> rows) {
  if (!rows.empty()) return {rows.begin(), rows.end()};
  std::vector<std::size_t> all(data.size());
  std::iota(all.begin(), all.end(), 0);
  return all;
}

double LogSumExp(std::span<const double> z) {
  const double m = *std::max_element(z.begin(), z.end());
  double s = 0.0;
  for (double v : z) s += std::exp(v - m);
  return m + std::log(s);
}

struct AdamState {
  std::vector<double> m, v;
  long t = 0;
};

void Step(ParameterVector& w, const ParameterVector& g, const TrainOptions& o,
          AdamState& adam) {
  if (o.optimizer == Optimizer::kSgd) {
    for (std::size_t j = 0; j < w.size(); ++j) w[j] -= o.learning_rate * g[j];
    return;
  }
  constexpr double b1 = 0.9, b2 = 0.999, eps = 1e-8;
  if (adam.m.empty()) {
    adam.m.assign(w.size(), 0.0);
    adam.v.assign(w.size(), 0.0);
  }
  ++adam.t;
  const double c1 = 1.0 - std::pow(b1, adam.t);
  const double c2 = 1.0 - std::pow(b2, adam.t);
  for (std::size_t j = 0; j < w.size(); ++j) {
    adam.m[j] = b1 * adam.m[j] + (1 - b1) * g[j];
    adam.v[j] = b2 * adam.v[j] + (1 - b2) * g[j] * g[j];
    w[j] -= o.learning_rate * (adam.m[j] / c1) / (std::sqrt(adam.v[j] / c2) + eps);
  }
}

// Shared loop for plain and adversarial local training.
ParameterVector Train(const Learner& learner, const datasim::Dataset& shard,
                      const TrainOptions& opts, const AdvConfig* adv,
                      const ParameterVector& anchor, std::uint64_t seed) {
  if (shard.empty()) throw ArgumentError("local_train: empty shard");
  if (opts.batch_size == 0) throw ArgumentError("local_train: batch size 0");
  if (opts.prox_mu < 0) throw ArgumentError("local_train: prox_mu < 0");
  if (opts.prox_mu > 0 && anchor.size() != learner.num_params()) {
    throw ArgumentError("local_train: anchor length mismatch");
  }
  if (adv) adv->Validate();
  Learner model = learner;
  ParameterVector w = model.weights();
  AdamState adam;
  Rng rng(seed);
  std::vector<std::size_t> order(shard.size());
  std::iota(order.begin(), order.end(), 0);
  const bool mix = adv != nullptr && adv->lambda_adv > 0.0;
  datasim::Dataset adv_batch;
  adv_batch.num_features = shard.num_features;
  adv_batch.num_classes = shard.num_classes;
  for (int epoch = 0; epoch < opts.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0; start < order.size(); start += opts.batch_size) {
      const std::size_t end = std::min(order.size(), start + opts.batch_size);
      const std::span<const std::size_t> batch(order.data() + start, end - start);
      model.set_weights(w);
      double loss = 0.0;
      ParameterVector g(w.size(), 0.0);
      const double clean_weight = mix ? 1.0 - adv->lambda_adv : 1.0;
      if (clean_weight > 0.0) {
        loss += clean_weight * model.Loss(shard, batch);
        const ParameterVector gc = model.Grad(shard, batch);
        for (std::size_t j = 0; j < g.size(); ++j) g[j] += clean_weight * gc[j];
      }
      if (mix) {
        adv_batch.features.clear();
        adv_batch.labels.clear();
        for (std::size_t i : batch) {
          adv_batch.Append(PgdExample(model, shard.row(i), shard.labels[i], *adv),
                           shard.labels[i]);
        }
        loss += adv->lambda_adv * model.Loss(adv_batch);
        const ParameterVector ga = model.Grad(adv_batch);
        for (std::size_t j = 0; j < g.size(); ++j) g[j] += adv->lambda_adv * ga[j];
      }
      if (opts.prox_mu > 0.0) {
        double dist2 = 0.0;
        for (std::size_t j = 0; j < g.size(); ++j) {
          const double diff = w[j] - anchor[j];
          g[j] += opts.prox_mu * diff;
          dist2 += diff * diff;
        }
        loss += 0.5 * opts.prox_mu * dist2;
      }
      if (!std::isfinite(loss)) {
        throw Error(ErrorCode::kDivergence, "local_train: non-finite loss");
      }
      Step(w, g, opts, adam);
    }
  }
  if (!w.AllFinite()) {
    throw Error(ErrorCode::kDivergence, "local_train: non-finite weights");
  }
  return w;
}

}  // namespace

std::string ToString(ModelKind k) {
  return k == ModelKind::kLogReg ? "logreg" : "mlp";
}

ModelKind ParseModelKind(const std::string& s) {
  if (s == "logreg") return ModelKind::kLogReg;
  if (s == "mlp") return ModelKind::kMlp;
  throw Error(ErrorCode::kConfig, "unknown model kind: " + s);
}

std::vector<double> Softmax(std::span<const double> logits) {
  std::vector<double> p(logits.size());
  const double lse = LogSumExp(logits);
  for (std::size_t c = 0; c < logits.size(); ++c) p[c] = std::exp(logits[c] - lse);
  return p;
}

Learner::Learner(ModelKind kind, ModelDims dims) : kind_(kind), dims_(dims) {
  if (dims.features < 1 || dims.classes < 2) {
    throw ArgumentError("learner: need features >= 1 and classes >= 2");
  }
  const std::size_t c = dims.classes;
  const std::size_t n = kind == ModelKind::kLogReg
                            ? dims.features * c + c
                            : dims.features * dims.hidden + dims.hidden +
                                  dims.hidden * c + c;
  weights_ = ParameterVector(n, 0.0);
}

Learner Learner::LogReg(std::size_t features, int classes) {
  return Learner(ModelKind::kLogReg, {features, classes, 0});
}

Learner Learner::Mlp(std::size_t features, std::size_t hidden, int classes,
                     std::uint64_t seed) {
  if (hidden < 1) throw ArgumentError("mlp: hidden width must be >= 1");
  Learner l(ModelKind::kMlp, {features, classes, hidden});
  Rng rng(seed);
  const double r1 = 1.0 / std::sqrt(static_cast<double>(features));
  const double r2 = 1.0 / std::sqrt(static_cast<double>(hidden));
  std::uniform_real_distribution<double> u1(-r1, r1), u2(-r2, r2);
  auto& w = l.weights_;
  const std::size_t w1 = hidden * features;
  const std::size_t w2_off = w1 + hidden;
  for (std::size_t j = 0; j < w1; ++j) w[j] = u1(rng);
  for (std::size_t j = 0; j < hidden * static_cast<std::size_t>(classes); ++j) {
    w[w2_off + j] = u2(rng);
  }
  return l;
}

void Learner::set_weights(ParameterVector w) {
  if (w.size() != weights_.size()) throw ArgumentError("learner: weight length");
  weights_ = std::move(w);
}

void Learner::CheckInput(std::span<const double> x) const {
  if (x.size() != dims_.features) throw ArgumentError("learner: feature width");
}

std::vector<double> Learner::Logits(std::span<const double> x) const {
  CheckInput(x);
  const std::size_t F = dims_.features, C = dims_.classes, H = dims_.hidden;
  const auto& w = weights_;
  std::vector<double> z(C);
  if (kind_ == ModelKind::kLogReg) {
    for (std::size_t c = 0; c < C; ++c) {
      double s = w[F * C + c];
      for (std::size_t f = 0; f < F; ++f) s += w[c * F + f] * x[f];
      z[c] = s;
    }
    return z;
  }
  std::vector<double> h(H);
  for (std::size_t k = 0; k < H; ++k) {
    double s = w[H * F + k];
    for (std::size_t f = 0; f < F; ++f) s += w[k * F + f] * x[f];
    h[k] = std::tanh(s);
  }
  const std::size_t w2 = H * F + H;
  const std::size_t b2 = w2 + C * H;
  for (std::size_t c = 0; c < C; ++c) {
    double s = w[b2 + c];
    for (std::size_t k = 0; k < H; ++k) s += w[w2 + c * H + k] * h[k];
    z[c] = s;
  }
  return z;
}

std::vector<double> Learner::Probabilities(std::span<const double> x) const {
  return Softmax(Logits(x));
}

int Learner::Predict(std::span<const double> x) const {
  const auto z = Logits(x);
  return static_cast<int>(std::max_element(z.begin(), z.end()) - z.begin());
}

double Learner::SampleLoss(std::span<const double> x, int y) const {
  if (y < 0 || y >= dims_.classes) throw ArgumentError("learner: label range");
  const auto z = Logits(x);
  return LogSumExp(z) - z[y];
}

double Learner::Loss(const datasim::Dataset& data,
                     std::span<const std::size_t> rows) const {
  const auto idx = AllRows(data, rows);
  if (idx.empty()) throw ArgumentError("learner: empty batch");
  double s = 0.0;
  for (std::size_t i : idx) s += SampleLoss(data.row(i), data.labels[i]);
  return s / static_cast<double>(idx.size());
}

void Learner::Backprop(std::span<const double> x, int y, double scale,
                       std::span<double> grad, std::span<double> dx) const {
  if (y < 0 || y >= dims_.classes) throw ArgumentError("learner: label range");
  CheckInput(x);
  const std::size_t F = dims_.features, C = dims_.classes, H = dims_.hidden;
  const auto& w = weights_;
  if (kind_ == ModelKind::kLogReg) {
    std::vector<double> dz = Probabilities(x);
    dz[y] -= 1.0;
    for (std::size_t c = 0; c < C; ++c) {
      const double d = scale * dz[c];
      if (!grad.empty()) {
        for (std::size_t f = 0; f < F; ++f) grad[c * F + f] += d * x[f];
        grad[F * C + c] += d;
      }
      if (!dx.empty()) {
        for (std::size_t f = 0; f < F; ++f) dx[f] += d * w[c * F + f];
      }
    }
    return;
  }
  std::vector<double> h(H);
  for (std::size_t k = 0; k < H; ++k) {
    double s = w[H * F + k];
    for (std::size_t f = 0; f < F; ++f) s += w[k * F + f] * x[f];
    h[k] = std::tanh(s);
  }
  const std::size_t w2 = H * F + H;
  const std::size_t b2 = w2 + C * H;
  std::vector<double> z(C);
  for (std::size_t c = 0; c < C; ++c) {
    double s = w[b2 + c];
    for (std::size_t k = 0; k < H; ++k) s += w[w2 + c * H + k] * h[k];
    z[c] = s;
  }
  std::vector<double> dz = Softmax(z);
  dz[y] -= 1.0;
  std::vector<double> da(H, 0.0);
  for (std::size_t c = 0; c < C; ++c) {
    const double d = scale * dz[c];
    for (std::size_t k = 0; k < H; ++k) {
      if (!grad.empty()) grad[w2 + c * H + k] += d * h[k];
      da[k] += d * w[w2 + c * H + k];
    }
    if (!grad.empty()) grad[b2 + c] += d;
  }
  for (std::size_t k = 0; k < H; ++k) {
    da[k] *= 1.0 - h[k] * h[k];
    if (!grad.empty()) {
      for (std::size_t f = 0; f < F; ++f) grad[k * F + f] += da[k] * x[f];
      grad[H * F + k] += da[k];
    }
    if (!dx.empty()) {
      for (std::size_t f = 0; f < F; ++f) dx[f] += da[k] * w[k * F + f];
    }
  }
}

ParameterVector Learner::Grad(const datasim::Dataset& data,
                              std::span<const std::size_t> rows) const {
  if (data.num_features != dims_.features) {
    throw ArgumentError("learner: dataset feature width mismatch");
  }
  const auto idx = AllRows(data, rows);
  if (idx.empty()) throw ArgumentError("learner: empty batch");
  ParameterVector g(weights_.size(), 0.0);
  const double scale = 1.0 / static_cast<double>(idx.size());
  for (std::size_t i : idx) Backprop(data.row(i), data.labels[i], scale, g.span(), {});
  return g;
}

ParameterVector Learner::SampleGrad(std::span<const double> x, int y) const {
  ParameterVector g(weights_.size(), 0.0);
  Backprop(x, y, 1.0, g.span(), {});
  return g;
}

std::vector<double> Learner::InputGrad(std::span<const double> x, int y) const {
  std::vector<double> dx(dims_.features, 0.0);
  Backprop(x, y, 1.0, {}, dx);
  return dx;
}

double AdvConfig::EffectiveStep() const {
  if (step_size > 0.0) return step_size;
  return steps > 0 ? 2.5 * epsilon / steps : 0.0;
}

void AdvConfig::Validate() const {
  if (epsilon < 0.0) throw ArgumentError("adv: epsilon < 0");
  if (steps < 0) throw ArgumentError("adv: steps < 0");
  if (lambda_adv < 0.0 || lambda_adv > 1.0) {
    throw ArgumentError("adv: lambda_adv outside [0, 1]");
  }
  if (box_hi < box_lo) throw ArgumentError("adv: empty domain box");
}

std::vector<double> PgdExample(const Learner& learner, std::span<const double> x,
                               int y, const AdvConfig& cfg) {
  cfg.Validate();
  std::vector<double> adv(x.begin(), x.end());
  if (cfg.epsilon == 0.0 || cfg.steps == 0) return adv;
  const double step = cfg.EffectiveStep();
  for (int s = 0; s < cfg.steps; ++s) {
    const auto g = learner.InputGrad(adv, y);
    for (std::size_t f = 0; f < adv.size(); ++f) {
      const double dir = g[f] > 0 ? 1.0 : (g[f] < 0 ? -1.0 : 0.0);
      double v = adv[f] + step * dir;
      v = std::clamp(v, x[f] - cfg.epsilon, x[f] + cfg.epsilon);
      adv[f] = std::clamp(v, cfg.box_lo, cfg.box_hi);
    }
  }
  return adv;
}

ParameterVector LocalTrain(const Learner& learner, const datasim::Dataset& shard,
                           const TrainOptions& opts, const ParameterVector& anchor,
                           std::uint64_t seed) {
  return Train(learner, shard, opts, nullptr, anchor, seed);
}

ParameterVector AdvLocalTrain(const Learner& learner,
                              const datasim::Dataset& shard,
                              const TrainOptions& opts, const AdvConfig& adv,
                              const ParameterVector& anchor, std::uint64_t seed) {
  return Train(learner, shard, opts, &adv, anchor, seed);
}

SmoteResult SmoteBalance(const datasim::Dataset& shard, int k_neighbors,
                         std::uint64_t seed) {
  if (k_neighbors < 1) throw ArgumentError("smote: k_neighbors must be >= 1");
  SmoteResult out;
  out.data = shard;
  const auto counts = shard.ClassCounts();
  const std::size_t target = *std::max_element(counts.begin(), counts.end());
  Rng rng(seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const std::size_t F = shard.num_features;
  std::vector<double> synth(F);
  for (int c = 0; c < shard.num_classes; ++c) {
    if (counts[c] == 0 || counts[c] == target) {
      if (counts[c] == 0) {
        out.warnings.push_back("smote: class " + std::to_string(c) +
                               " has no samples; left empty");
      }
      continue;
    }
    std::vector<std::size_t> members;
    for (std::size_t i = 0; i < shard.size(); ++i) {
      if (shard.labels[i] == c) members.push_back(i);
    }
    if (members.size() == 1) {
      out.warnings.push_back("smote: class " + std::to_string(c) +
                             " has a single sample; duplicating it");
    }
    // k nearest same-class neighbours per member, excluding itself.
    std::vector<std::vector<std::size_t>> neighbours(members.size());
    for (std::size_t a = 0; a < members.size(); ++a) {
      std::vector<std::pair<double, std::size_t>> dist;
      for (std::size_t b = 0; b < members.size(); ++b) {
        if (a == b) continue;
        double d2 = 0.0;
        const auto xa = shard.row(members[a]);
        const auto xb = shard.row(members[b]);
        for (std::size_t f = 0; f < F; ++f) d2 += (xa[f] - xb[f]) * (xa[f] - xb[f]);
        dist.emplace_back(d2, members[b]);
      }
      const std::size_t k = std::min<std::size_t>(k_neighbors, dist.size());
      std::partial_sort(dist.begin(), dist.begin() + k, dist.end());
      for (std::size_t i = 0; i < k; ++i) neighbours[a].push_back(dist[i].second);
    }
    std::uniform_int_distribution<std::size_t> pick_base(0, members.size() - 1);
    for (std::size_t n = counts[c]; n < target; ++n) {
      const std::size_t a = pick_base(rng);
      const auto x = shard.row(members[a]);
      if (neighbours[a].empty()) {
        out.data.Append(x, c);
        continue;
      }
      std::uniform_int_distribution<std::size_t> pick_nn(0, neighbours[a].size() - 1);
      const auto xn = shard.row(neighbours[a][pick_nn(rng)]);
      const double u = unif(rng);
      for (std::size_t f = 0; f < F; ++f) synth[f] = x[f] + u * (xn[f] - x[f]);
      out.data.Append(synth, c);
    }
  }
  return out;
}

std::vector<double> CalibrationModel::Calibrate(
    std::span<const double> logits) const {
  std::vector<double> z(logits.begin(), logits.end());
  for (auto& v : z) v /= temperature;
  return Softmax(z);
}

double TemperatureNll(std::span<const double> logits, std::span<const int> labels,
                      int classes, double temperature) {
  const std::size_t n = labels.size();
  if (n == 0 || logits.size() != n * classes) {
    throw ArgumentError("temperature: logits/labels shape mismatch");
  }
  std::vector<double> z(classes);
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (int c = 0; c < classes; ++c) z[c] = logits[i * classes + c] / temperature;
    total += LogSumExp(z) - z[labels[i]];
  }
  return total / static_cast<double>(n);
}

CalibrationModel FitTemperature(std::span<const double> logits,
                                std::span<const int> labels, int classes) {
  if (labels.empty()) throw ArgumentError("fit_temperature: empty validation set");
  if (classes < 2 || logits.size() != labels.size() * classes) {
    throw ArgumentError("fit_temperature: logits/labels shape mismatch");
  }
  CalibrationModel model;
  bool degenerate = true;
  for (std::size_t i = 0; i < labels.size() && degenerate; ++i) {
    for (int c = 1; c < classes; ++c) {
      if (logits[i * classes + c] != logits[i * classes]) {
        degenerate = false;
        break;
      }
    }
  }
  if (degenerate) {
    model.warnings.push_back("fit_temperature: all logits equal; using T=1");
    return model;
  }
  auto nll = [&](double t) { return TemperatureNll(logits, labels, classes, t); };
  const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double a = kTempLo, b = kTempHi;
  double c = b - inv_phi * (b - a), d = a + inv_phi * (b - a);
  double fc = nll(c), fd = nll(d);
  while (b - a > kTempTol) {
    if (fc < fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - inv_phi * (b - a);
      fc = nll(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + inv_phi * (b - a);
      fd = nll(d);
    }
  }
  double best_t = 0.5 * (a + b);
  double best = nll(best_t);
  for (double t : {1.0, kTempLo, kTempHi}) {
    const double v = nll(t);
    if (v < best) {
      best = v;
      best_t = t;
    }
  }
  model.temperature = best_t;
  return model;
}

EvalResult Evaluate(const Learner& learner, const datasim::Dataset& data) {
  EvalResult r;
  const int C = data.num_classes;
  r.per_class_f1.assign(C, 0.0);
  if (data.empty()) return r;
  std::vector<std::size_t> tp(C, 0), fp(C, 0), fn(C, 0);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const int y = data.labels[i];
    const int p = learner.Predict(data.row(i));
    if (p == y) {
      ++correct;
      ++tp[y];
    } else {
      ++fn[y];
      if (p < C) ++fp[p];
    }
  }
  r.accuracy = static_cast<double>(correct) / static_cast<double>(data.size());
  double sum = 0.0;
  for (int c = 0; c < C; ++c) {
    const double denom = 2.0 * tp[c] + fp[c] + fn[c];
    r.per_class_f1[c] = denom > 0 ? 2.0 * tp[c] / denom : 0.0;
    sum += r.per_class_f1[c];
  }
  r.macro_f1 = sum / C;
  return r;
}

}  // namespace safefl::learners
