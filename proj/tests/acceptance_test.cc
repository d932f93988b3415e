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

// Acceptance suite: one PASS/FAIL line per criterion. Exits non-zero when any
// criterion fails.

#include <algorithm>
#include <chrono>
#include <cstdarg>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "safefl/experiment.hpp"
#include "safefl/guard.hpp"
#include "safefl/learners.hpp"
#include "safefl/paillier.hpp"
#include "safefl/protocol.hpp"
#include "safefl/quantizer.hpp"
#include "safefl/threat.hpp"

namespace {

namespace fs = std::filesystem;
using namespace safefl;

struct Outcome {
  bool pass = false;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double Seconds(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string Printf(const char* fmt, ...) __attribute__((format(printf, 1, 2)));
std::string Printf(const char* fmt, ...) {
  char buf[512];
  va_list ap;
  va_start(ap, fmt);
  std::vsnprintf(buf, sizeof(buf), fmt, ap);
  va_end(ap);
  return buf;
}

std::string ReadFile(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + p.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

experiment::ExperimentConfig LoadConfig(const char* name) {
  return experiment::ParseConfig(ReadFile(fs::path(SAFEFL_SOURCE_DIR) / "configs" / name));
}

double Mean(const std::vector<double>& v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

// Random signed value with up to `bits` magnitude bits.
mpz_class RandomSigned(gmp_randclass& gr, unsigned bits) {
  mpz_class v = gr.get_z_bits(bits);
  return (gr.get_z_bits(1) == 1) ? mpz_class(-v) : v;
}

Outcome Criterion1() {
  const auto start = Clock::now();
  long checks = 0;
  gmp_randclass gr(gmp_randinit_mt);
  gr.seed(2026);
  // 10 keys x 1000 cases; operands stay below n/4 so sums remain in range.
  for (std::uint64_t key = 0; key < 10; ++key) {
    const auto kp = paillier::Keygen(512, 1000 + key);
    for (int i = 0; i < 1000; ++i) {
      const mpz_class a = RandomSigned(gr, 509);
      const mpz_class b = RandomSigned(gr, 509);
      const auto ca = paillier::Encrypt(kp.pk, paillier::SignedPlain(a), key * 1000003 + 2 * i);
      const auto cb =
          paillier::Encrypt(kp.pk, paillier::SignedPlain(b), key * 1000003 + 2 * i + 1);
      if (paillier::Decrypt(kp.sk, kp.pk, ca).value != a) {
        return {false, Printf("roundtrip mismatch key=%llu case=%d",
                              static_cast<unsigned long long>(key), i)};
      }
      const std::vector<paillier::Ciphertext> both = {ca, cb};
      if (paillier::Decrypt(kp.sk, kp.pk, paillier::HomSum(kp.pk, both)).value != a + b) {
        return {false, Printf("homomorphism mismatch key=%llu case=%d",
                              static_cast<unsigned long long>(key), i)};
      }
      ++checks;
    }
  }
  // Toy key n = 35: every plaintext, every unit nonce, every plaintext pair.
  const auto toy = paillier::KeypairFromPrimes(5, 7);
  long toy_checks = 0;
  for (long m = 0; m < 35; ++m) {
    for (long r = 1; r < 35; ++r) {
      if (std::gcd(r, 35L) != 1) continue;
      const auto plain = paillier::DecodeSigned(toy.pk, mpz_class(m));
      const auto c = paillier::EncryptWithNonce(toy.pk, plain, r);
      if (paillier::Decrypt(toy.sk, toy.pk, c) != plain) {
        return {false, Printf("toy roundtrip m=%ld r=%ld", m, r)};
      }
      ++toy_checks;
    }
    for (long m2 = 0; m2 < 35; ++m2) {
      const auto c1 = paillier::EncryptWithNonce(toy.pk, paillier::DecodeSigned(toy.pk, m), 2);
      const auto c2 = paillier::EncryptWithNonce(toy.pk, paillier::DecodeSigned(toy.pk, m2), 3);
      const std::vector<paillier::Ciphertext> both = {c1, c2};
      const auto sum = paillier::Decrypt(toy.sk, toy.pk, paillier::HomSum(toy.pk, both));
      const mpz_class expect = (m + m2) % 35;
      if (paillier::EncodeSigned(toy.pk, sum) != expect) {
        return {false, Printf("toy homomorphism m=%ld m2=%ld", m, m2)};
      }
      ++toy_checks;
    }
  }
  const double t = Seconds(start);
  return {t < 60.0, Printf("%ld cases at 512-bit keys, %ld toy-key checks, %.1f s (limit 60 s)",
                           checks, toy_checks, t)};
}

// Brute-force median of a column of +-1 values.
double OracleMedian(std::vector<int> col) {
  std::sort(col.begin(), col.end());
  const std::size_t k = col.size();
  return k % 2 ? col[k / 2] : 0.5 * (col[k / 2 - 1] + col[k / 2]);
}

protocol::ClientUpdateEnvelope BinarizedEnvelope(int id, const std::vector<std::int8_t>& signs) {
  protocol::ClientUpdateEnvelope env;
  env.client_id = id;
  env.kind = protocol::PayloadKind::kBinarized;
  env.binarized.signs = signs;
  return env;
}

Outcome Criterion2() {
  long exhaustive = 0;
  for (int k = 1; k <= 20; ++k) {
    for (int d = 1; k * d <= 20; ++d) {
      const std::uint32_t total = 1u << (k * d);
      std::vector<int> col(k);
      for (std::uint32_t mask = 0; mask < total; ++mask) {
        for (int j = 0; j < d; ++j) {
          long sum = 0;
          for (int i = 0; i < k; ++i) {
            col[i] = (mask >> (i * d + j)) & 1u ? 1 : -1;
            sum += col[i];
          }
          if (protocol::SignOfSum(sum) != OracleMedian(col)) {
            return {false, Printf("exhaustive mismatch K=%d d=%d mask=%u", k, d, mask)};
          }
        }
        ++exhaustive;
      }
    }
  }
  // Randomized cases through the server aggregation path.
  std::mt19937_64 rng(77);
  protocol::AggregationConfig cfg;
  cfg.encryption = false;
  for (int t = 0; t < 100000; ++t) {
    const int k = 1 + static_cast<int>(rng() % 15);
    const int d = 1 + static_cast<int>(rng() % 8);
    std::vector<protocol::ClientUpdateEnvelope> envs;
    std::vector<std::vector<int>> cols(d, std::vector<int>(k));
    for (int i = 0; i < k; ++i) {
      std::vector<std::int8_t> s(d);
      for (int j = 0; j < d; ++j) {
        s[j] = rng() & 1 ? 1 : -1;
        cols[j][i] = s[j];
      }
      envs.push_back(BinarizedEnvelope(i, s));
    }
    const auto agg = protocol::ServerAggregate(envs, cfg, nullptr);
    for (int j = 0; j < d; ++j) {
      if (agg.s_hat[j] != OracleMedian(cols[j])) {
        return {false, Printf("random mismatch case=%d", t)};
      }
    }
  }
  // A slice of random cases through the encrypted path.
  const auto kp = paillier::Keygen(256, 5);
  protocol::AggregationConfig enc;
  for (int t = 0; t < 200; ++t) {
    const int k = 1 + static_cast<int>(rng() % 15);
    const int d = 1 + static_cast<int>(rng() % 8);
    std::vector<protocol::ClientUpdateEnvelope> envs;
    std::vector<std::vector<int>> cols(d, std::vector<int>(k));
    for (int i = 0; i < k; ++i) {
      protocol::ClientUpdateEnvelope env;
      env.client_id = i;
      env.kind = protocol::PayloadKind::kCiphertext;
      for (int j = 0; j < d; ++j) {
        cols[j][i] = rng() & 1 ? 1 : -1;
        env.ciphertexts.push_back(
            paillier::Encrypt(kp.pk, paillier::SignedPlain(static_cast<long>(cols[j][i])), rng()));
      }
      envs.push_back(std::move(env));
    }
    const auto agg = protocol::ServerAggregate(envs, enc, &kp);
    for (int j = 0; j < d; ++j) {
      if (agg.s_hat[j] != OracleMedian(cols[j])) {
        return {false, Printf("encrypted mismatch case=%d", t)};
      }
    }
  }
  return {true, Printf("%ld exhaustive matrices (K*d<=20), 100000 random plaintext + 200 "
                       "random encrypted cases (K<=15), all exact",
                       exhaustive)};
}

Outcome Criterion3() {
  auto cfg = LoadConfig("toy.json");
  cfg.sim.rounds = 60;
  int compared = 0;
  for (std::uint64_t seed : {1ull, 2ull}) {
    auto enc_cfg = cfg;
    enc_cfg.toggles.encryption = true;
    auto plain_cfg = cfg;
    plain_cfg.toggles.encryption = false;
    const auto enc = protocol::RunSimulation(enc_cfg.Effective(seed));
    const auto plain = protocol::RunSimulation(plain_cfg.Effective(seed));
    if (enc.reports.size() != plain.reports.size()) return {false, "trajectory length differs"};
    for (std::size_t r = 0; r < enc.reports.size(); ++r) {
      if (enc.reports[r].test_acc != plain.reports[r].test_acc ||
          enc.reports[r].macro_f1 != plain.reports[r].macro_f1) {
        return {false, Printf("seed %llu round %zu differs", static_cast<unsigned long long>(seed),
                              r + 1)};
      }
      ++compared;
    }
    if (enc.final_weights != plain.final_weights) return {false, "final weights differ"};
  }
  return {true, Printf("%d round accuracies bit-identical across 2 seeds (final acc equal)",
                       compared)};
}

Outcome Criterion4() {
  const std::vector<std::uint64_t> dims = {1,    2,       35,         147,       1000,
                                           4096, 1000000, 7000000000, 1ull << 40};
  for (auto d : dims) {
    const auto full = quantizer::PayloadBits(d, quantizer::PayloadScheme::kFull32);
    const auto bin = quantizer::PayloadBits(d, quantizer::PayloadScheme::kBinarized);
    if (full != 32 * bin) return {false, Printf("d=%llu ratio not 32", (unsigned long long)d)};
  }
  // The simulator's counters agree with the closed form.
  auto cfg = LoadConfig("toy.json");
  cfg.sim.rounds = 3;
  cfg.toggles.encryption = false;
  const auto bin_run = protocol::RunSimulation(cfg.Effective(1));
  cfg.toggles.smartification = false;
  const auto full_run = protocol::RunSimulation(cfg.Effective(1));
  const auto b = bin_run.reports.back().logical_bits_cum;
  const auto f = full_run.reports.back().logical_bits_cum;
  if (f != 32 * b) return {false, Printf("simulated ratio %llu/%llu", (unsigned long long)f,
                                         (unsigned long long)b)};
  return {true, Printf("ratio exactly 32 for %zu dims; simulated %llu/%llu bits", dims.size(),
                       (unsigned long long)f, (unsigned long long)b)};
}

struct ParityStats {
  std::vector<double> acc;
  std::vector<double> r95;
};

ParityStats RunSeeds(const experiment::ExperimentConfig& cfg) {
  ParityStats out;
  for (std::uint64_t seed : cfg.seeds) {
    const auto res = protocol::RunSimulation(cfg.Effective(seed));
    if (res.diverged || res.reports.empty()) {
      throw std::runtime_error("run diverged: " + res.diagnostic);
    }
    const double final_acc = res.reports.back().test_acc;
    out.acc.push_back(final_acc);
    out.r95.push_back(*experiment::RoundsToAccuracy(res.reports, 0.95 * final_acc));
  }
  return out;
}

Outcome Criterion5() {
  const auto start = Clock::now();
  const auto secure = RunSeeds(LoadConfig("toy.json"));
  const auto fedavg = RunSeeds(LoadConfig("toy_fedavg.json"));
  const double t = Seconds(start);
  const double acc_gap = Mean(fedavg.acc) - Mean(secure.acc);
  const double ratio = Mean(secure.r95) / Mean(fedavg.r95);
  const bool pass = std::fabs(acc_gap) <= 0.02 && ratio <= 1.3 && t < 300.0;
  return {pass, Printf("acc secure %.4f vs FedAvg %.4f (gap %.2f pp, limit 2), rounds-to-95%% "
                       "%.1f vs %.1f (ratio %.2f, limit 1.3), %.0f s (limit 300)",
                       Mean(secure.acc), Mean(fedavg.acc), 100 * acc_gap, Mean(secure.r95),
                       Mean(fedavg.r95), ratio, t)};
}

Outcome Criterion6() {
  const auto kp = paillier::Keygen(256, 21);
  protocol::AggregationConfig cfg;
  cfg.variant = quantizer::ThresholdVariant::kZero;
  threat::AdversarySpec flip;
  flip.kind = threat::AdversaryKind::kSignFlip;
  long coords = 0;
  for (int k = 1; k <= 11; ++k) {
    for (int f = 0; f <= (k - 1) / 2; ++f) {
      // Coordinates enumerate every malicious sign pattern under both honest signs.
      const std::size_t patterns = std::size_t{1} << f;
      const std::size_t d = 2 * patterns;
      std::vector<protocol::ClientUpdateEnvelope> envs;
      for (int i = 0; i < k; ++i) {
        const bool malicious = i >= k - f;
        ParameterVector delta(d);
        for (std::size_t j = 0; j < d; ++j) {
          const double honest = j < patterns ? 1.0 : -1.0;
          if (!malicious) {
            delta[j] = honest * (0.5 + 0.01 * i);
          } else {
            const int bit = static_cast<int>((j % patterns) >> (i - (k - f))) & 1;
            // Pre-flip value; the sign-flip adversary negates it on the wire.
            delta[j] = bit ? 1.0 : -1.0;
          }
        }
        envs.push_back(protocol::PackageUpdate(i, delta, cfg, &kp.pk, malicious ? &flip : nullptr,
                                               static_cast<std::uint64_t>(k * 100 + i)));
      }
      const auto agg = protocol::ServerAggregate(envs, cfg, &kp);
      for (std::size_t j = 0; j < d; ++j) {
        const double honest = j < patterns ? 1.0 : -1.0;
        if (agg.s_hat[j] != honest) {
          return {false, Printf("flip at K=%d f=%d coord=%zu", k, f, j)};
        }
        ++coords;
      }
    }
  }
  return {true, Printf("%ld encrypted coordinates over K=1..11, f<=floor((K-1)/2), all "
                       "malicious patterns; no flips",
                       coords)};
}

Outcome Criterion7() {
  const auto cfg = LoadConfig("backdoor.json");
  int wins = 0;
  std::string values;
  for (std::uint64_t seed : cfg.seeds) {
    const auto p = experiment::RunPoisonComparison(cfg, seed);
    wins += p.asr_median_mode < p.asr_mean_mode;
    values += Printf(" s%llu:%.3f/%.3f", static_cast<unsigned long long>(seed), p.asr_median_mode,
                     p.asr_mean_mode);
  }
  return {wins >= 4,
          Printf("median<mean in %d/5 seeds (limit 4); ASR median/mean:%s", wins, values.c_str())};
}

Outcome Criterion8() {
  auto cfg = LoadConfig("toy.json");
  cfg.inversion.trials = 20;
  const auto inv = experiment::RunInversionTrials(cfg, 1);
  const bool pass = inv.binarized_psnr_mean < inv.full_psnr_mean;
  return {pass, Printf("%d paired trials: full-precision %.2f dB vs binarized %.2f dB (gap "
                       "%.2f dB; PSNR capped at 100 dB, %d exact)",
                       inv.trials, inv.full_psnr_mean, inv.binarized_psnr_mean,
                       inv.full_psnr_mean - inv.binarized_psnr_mean, inv.full_infinite)};
}

Outcome Criterion9() {
  datasim::GenerateParams gp;
  const auto ds = datasim::Generate(gp, 9);
  std::mt19937_64 rng(9);
  std::normal_distribution<double> nd(0.0, 0.3);
  int full_hits = 0, bin_hits = 0;
  const int trials = 200;
  for (int t = 0; t < trials; ++t) {
    learners::Learner model =
        t % 2 ? learners::Learner::Mlp(gp.features, 16, gp.classes, rng())
              : learners::Learner::LogReg(gp.features, gp.classes);
    ParameterVector w = model.weights();
    for (auto& v : w) v += nd(rng);
    model.set_weights(w);
    const std::size_t idx = rng() % ds.size();
    const auto g = model.SampleGrad(ds.row(idx), ds.labels[idx]);
    const auto label = threat::InferLabel(g.span().subspan(model.output_bias_offset()));
    full_hits += label && *label == ds.labels[idx];
    ParameterVector update(g.size());
    for (std::size_t j = 0; j < g.size(); ++j) update[j] = -g[j];
    const auto bin = quantizer::Smartify(update);
    std::vector<double> as_grad(gp.classes);
    for (int c = 0; c < gp.classes; ++c) {
      as_grad[c] = -static_cast<double>(bin.signs[model.output_bias_offset() + c]);
    }
    const auto bl = threat::InferLabel(as_grad);
    bin_hits += bl && *bl == ds.labels[idx];
  }
  return {full_hits == trials,
          Printf("full-precision %d/%d (logreg+MLP); binarized recovery %.1f%% (reported)",
                 full_hits, trials, 100.0 * bin_hits / trials)};
}

Outcome Criterion10() {
  const std::size_t d = 50;
  std::mt19937_64 rng(10);
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  // A = Q diag(lambda) Q^T with lambda in [0.1, 1] and lambda_max = 1.
  std::vector<std::vector<double>> q(d, std::vector<double>(d));
  for (auto& row : q) {
    for (auto& v : row) v = unif(rng);
  }
  for (std::size_t i = 0; i < d; ++i) {
    for (std::size_t k = 0; k < i; ++k) {
      const double proj = std::inner_product(q[i].begin(), q[i].end(), q[k].begin(), 0.0);
      for (std::size_t j = 0; j < d; ++j) q[i][j] -= proj * q[k][j];
    }
    const double n = std::sqrt(std::inner_product(q[i].begin(), q[i].end(), q[i].begin(), 0.0));
    for (auto& v : q[i]) v /= n;
  }
  std::vector<double> lambda(d);
  std::uniform_real_distribution<double> eig(0.1, 1.0);
  for (auto& l : lambda) l = eig(rng);
  lambda[0] = 1.0;
  const double L = 1.0;
  std::vector<double> a(d * d, 0.0);
  for (std::size_t i = 0; i < d; ++i) {
    for (std::size_t j = 0; j < d; ++j) {
      for (std::size_t k = 0; k < d; ++k) a[i * d + j] += q[k][i] * lambda[k] * q[k][j];
    }
  }
  auto grad = [&](const ParameterVector& w) {
    ParameterVector g(d);
    for (std::size_t i = 0; i < d; ++i) {
      for (std::size_t j = 0; j < d; ++j) g[i] += a[i * d + j] * w[j];
    }
    return g;
  };
  auto loss = [&](const ParameterVector& w) { return 0.5 * Dot(w.span(), grad(w).span()); };

  const double eta = 1e-4;
  const int steps = 2000;
  int passed_steps = 0;
  std::string notes;
  for (auto variant :
       {quantizer::ThresholdVariant::kAbsMedian, quantizer::ThresholdVariant::kSignedMedian}) {
    ParameterVector w(d);
    for (auto& v : w) v = unif(rng);
    double min_gamma = 1.0, min_margin = INFINITY;
    for (int t = 0; t < steps; ++t) {
      const ParameterVector g = grad(w);
      // The client binarizes its update -g; the surrogate gradient is the negation.
      ParameterVector update(d);
      for (std::size_t j = 0; j < d; ++j) update[j] = -g[j];
      const auto bin = quantizer::Smartify(update, variant).ToVector();
      ParameterVector g_tilde(d);
      for (std::size_t j = 0; j < d; ++j) g_tilde[j] = -bin[j];
      ParameterVector next(d);
      for (std::size_t j = 0; j < d; ++j) next[j] = w[j] - eta * g_tilde[j];
      const double f0 = loss(w), f1 = loss(next);
      const auto rep = quantizer::CosineAlignment(
          g, g_tilde, quantizer::DescentProbe{eta, L, f0, f1, std::nullopt});
      const double gamma = *rep.gamma;
      // Independent evaluation of both sides.
      const double gn = Norm2(g.span()), tn = Norm2(g_tilde.span());
      const double rhs = f0 - eta * gamma * gn * gn + 0.5 * L * eta * eta * tn * tn;
      if (!(eta <= gamma / L)) {
        return {false, Printf("%s step %d: step-size condition eta <= gamma/L violated "
                              "(gamma=%.4g)",
                              quantizer::ToString(variant).c_str(), t, gamma)};
      }
      if (!(f1 <= rhs) || !rep.DescentHolds()) {
        return {false, Printf("%s step %d: descent inequality violated (%.17g > %.17g)",
                              quantizer::ToString(variant).c_str(), t, f1, rhs)};
      }
      min_gamma = std::min(min_gamma, gamma);
      min_margin = std::min(min_margin, rhs - f1);
      ++passed_steps;
      w = next;
    }
    notes += Printf(" %s: min gamma %.3f, min margin %.3g;", quantizer::ToString(variant).c_str(),
                    min_gamma, min_margin);
  }
  return {true, Printf("%d steps (2 variants, d=%zu, L=1, eta=%g) all satisfy the inequality;%s",
                       passed_steps, d, eta, notes.c_str())};
}

Outcome Criterion11() {
  std::mt19937_64 rng(11);
  std::student_t_distribution<double> t3(3.0);
  const std::size_t d = 10000;
  std::vector<double> g_signed, g_zero, g_abs;
  bool all_positive = true;
  for (int draw = 0; draw < 100; ++draw) {
    ParameterVector g(d);
    for (auto& v : g) v = t3(rng);
    auto gamma = [&](quantizer::ThresholdVariant v) {
      return *quantizer::CosineAlignment(g, quantizer::Smartify(g, v).ToVector()).gamma;
    };
    g_signed.push_back(gamma(quantizer::ThresholdVariant::kSignedMedian));
    g_zero.push_back(gamma(quantizer::ThresholdVariant::kZero));
    g_abs.push_back(gamma(quantizer::ThresholdVariant::kAbsMedian));
    all_positive = all_positive && g_signed.back() > 0 && g_abs.back() > 0;
  }
  const bool ordering = Mean(g_signed) >= Mean(g_zero);
  return {ordering && all_positive,
          Printf("mean gamma signed-median %.5f vs zero %.5f (ordering %s); abs-median %.5f; "
                 "all median-variant gammas > 0: %s",
                 Mean(g_signed), Mean(g_zero), ordering ? "holds" : "does not hold",
                 Mean(g_abs), all_positive ? "yes" : "no")};
}

Outcome Criterion12() {
  std::mt19937_64 rng(12);
  std::normal_distribution<double> nd(0.0, 0.5);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  double worst = 0.0;
  for (auto kind : {learners::ModelKind::kLogReg, learners::ModelKind::kMlp}) {
    for (int inst = 0; inst < 100; ++inst) {
      const std::size_t f = 2 + rng() % 8;
      const int c = 2 + static_cast<int>(rng() % 5);
      learners::Learner m = kind == learners::ModelKind::kLogReg
                                ? learners::Learner::LogReg(f, c)
                                : learners::Learner::Mlp(f, 2 + rng() % 6, c, rng());
      ParameterVector w(m.num_params());
      for (auto& v : w) v = nd(rng);
      m.set_weights(w);
      std::vector<double> x(f);
      for (auto& v : x) v = unif(rng);
      const int y = static_cast<int>(rng() % c);
      const auto g = m.SampleGrad(x, y);
      const double h = 1e-5;
      double diff = 0.0, scale = 0.0;
      for (std::size_t j = 0; j < w.size(); ++j) {
        ParameterVector up = w, dn = w;
        up[j] += h;
        dn[j] -= h;
        learners::Learner mu = m, md = m;
        mu.set_weights(up);
        md.set_weights(dn);
        const double fd = (mu.SampleLoss(x, y) - md.SampleLoss(x, y)) / (2 * h);
        diff = std::max(diff, std::fabs(fd - g[j]));
        scale = std::max({scale, std::fabs(fd), std::fabs(g[j])});
      }
      worst = std::max(worst, diff / scale);
    }
  }
  return {worst < 1e-4,
          Printf("max relative error %.3g over 200 instances (limit 1e-4; inf-norm relative)",
                 worst)};
}

Outcome Criterion13() {
  const auto base = LoadConfig("toy.json");
  auto dir = base;
  dir.sim.partition.scheme = datasim::PartitionScheme::kDirichlet;
  dir.sim.partition.dirichlet_alpha = 0.1;
  auto prox = dir;
  prox.sim.aggregation.fedprox_mu = 0.01;
  const double iid = Mean(RunSeeds(base).acc);
  const double skew = Mean(RunSeeds(dir).acc);
  const double fedprox = Mean(RunSeeds(prox).acc);
  const bool pass = skew <= iid && fedprox >= skew - 0.005;
  return {pass, Printf("IID %.4f, Dirichlet(0.1) %.4f, FedProx(0.01) %.4f (delta %+.2f pp, "
                       "limit -0.5)",
                       iid, skew, fedprox, 100 * (fedprox - skew))};
}

Outcome Criterion14() {
  std::mt19937_64 rng(14);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  for (int t = 0; t < 1000; ++t) {
    guard::ClaimEvidence ce;
    const std::size_t m = 1 + rng() % 10;
    for (std::size_t i = 0; i < m; ++i) ce.nli_scores.push_back(unif(rng));
    ce.confidence = unif(rng);
    double sum = 0.0;
    for (double s : ce.nli_scores) sum += s;
    const double oracle = ce.confidence * (sum / static_cast<double>(m));
    if (guard::FaithScore(ce) != oracle) return {false, Printf("oracle mismatch case %d", t)};
  }
  for (int t = 0; t < 10000; ++t) {
    guard::ClaimEvidence ce;
    const std::size_t m = 1 + rng() % 10;
    for (std::size_t i = 0; i < m; ++i) ce.nli_scores.push_back(unif(rng));
    ce.confidence = unif(rng);
    const double before = guard::FaithScore(ce);
    guard::ClaimEvidence up = ce;
    if (rng() & 1) {
      double& s = up.nli_scores[rng() % m];
      s += (1.0 - s) * unif(rng);
    } else {
      up.confidence += (1.0 - up.confidence) * unif(rng);
    }
    const double after = guard::FaithScore(up);
    const double tau = unif(rng);
    if (after < before) return {false, Printf("score decreased at perturbation %d", t)};
    if (guard::GuardDecision(before, tau) == guard::Decision::kPass &&
        guard::GuardDecision(after, tau) != guard::Decision::kPass) {
      return {false, Printf("decision regressed at perturbation %d", t)};
    }
  }
  return {true, "1000 exact oracle matches; 10000 upward perturbations monotone in score and "
                "decision"};
}

Outcome Criterion15() {
  const fs::path root = fs::temp_directory_path() / "safefl_acceptance_determinism";
  fs::remove_all(root);
  fs::create_directories(root);
  const std::string claims = (root / "claims.csv").string();
  std::ofstream(claims) << "nli_scores,confidence\n0.9;0.8,0.9\n0.2;0.3,0.7\n";
  auto text = ReadFile(fs::path(SAFEFL_SOURCE_DIR) / "configs" / "smoke.json");
  text.insert(text.find('{') + 1, "\"guard\": {\"input\": \"" + claims + "\"},");
  int files = 0;
  for (const char* cmd : experiment::kSubcommands) {
    const auto a = experiment::RunCommand(cmd, text, (root / "a").string(), {});
    const auto b = experiment::RunCommand(cmd, text, (root / "b").string(), {});
    if (a.code != experiment::ExitCode::kOk || b.code != experiment::ExitCode::kOk) {
      return {false, std::string(cmd) + " failed: " + a.message};
    }
    if (a.artifacts.size() != b.artifacts.size()) return {false, "artifact count differs"};
    for (std::size_t i = 0; i < a.artifacts.size(); ++i) {
      if (ReadFile(a.artifacts[i]) != ReadFile(b.artifacts[i])) {
        return {false, "bytes differ: " + a.artifacts[i]};
      }
      ++files;
    }
  }
  fs::remove_all(root);
  return {true, Printf("%d artifacts across %zu subcommands byte-identical on re-run", files,
                       std::size(experiment::kSubcommands))};
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
      {"Paillier roundtrip and homomorphism", Criterion1},
      {"Median equals sign-of-sum", Criterion2},
      {"Encryption transparency", Criterion3},
      {"Compression accounting 32x", Criterion4},
      {"Convergence parity", Criterion5},
      {"Byzantine exactness", Criterion6},
      {"Backdoor ordering", Criterion7},
      {"Inversion ordering", Criterion8},
      {"Label recovery", Criterion9},
      {"Descent inequality", Criterion10},
      {"Alignment ordering", Criterion11},
      {"Gradient correctness", Criterion12},
      {"Non-IID trend", Criterion13},
      {"Guard arithmetic", Criterion14},
      {"Determinism", Criterion15},
  };
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const auto start = Clock::now();
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failures += !o.pass;
    std::printf("[%s] %2zu %s: %s (%.1f s)\n", o.pass ? "PASS" : "FAIL", i + 1,
                criteria[i].first, o.detail.c_str(), Seconds(start));
    std::fflush(stdout);
  }
  std::printf("%zu/%zu criteria passed\n", criteria.size() - failures, criteria.size());
  return failures == 0 ? 0 : 1;
}
