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

#include "safefl/protocol.hpp"

#include <algorithm>
#include <cmath>

namespace safefl::protocol {
namespace {

constexpr std::uint64_t kDataStream = 1;
constexpr std::uint64_t kPartitionStream = 2;
constexpr std::uint64_t kPoisonStream = 3;
constexpr std::uint64_t kSmoteStream = 4;
constexpr std::uint64_t kInitStream = 5;
constexpr std::uint64_t kKeyStream = 6;
constexpr std::uint64_t kRoundStream = 7;
constexpr std::uint64_t kDpStream = 0xD9;
constexpr std::uint64_t kNonceStream = 0xE7;

Error ProtocolError(const std::string& msg) {
  return Error(ErrorCode::kProtocol, msg);
}

ParameterVector Mean(const std::vector<ParameterVector>& rows) {
  ParameterVector out(rows.front().size(), 0.0);
  for (const auto& r : rows) {
    for (std::size_t j = 0; j < out.size(); ++j) out[j] += r[j];
  }
  for (auto& v : out) v /= static_cast<double>(rows.size());
  return out;
}

}  // namespace

std::string ToString(AggregationMode m) {
  switch (m) {
    case AggregationMode::kSecureMajority:
      return "secure_majority";
    case AggregationMode::kPlaintextMedian:
      return "plaintext_median";
    case AggregationMode::kMean:
      return "mean";
    case AggregationMode::kDpMean:
      return "dp_mean";
    case AggregationMode::kSignSgdMajority:
      return "signsgd_majority";
  }
  return "secure_majority";
}

AggregationMode ParseAggregationMode(const std::string& s) {
  if (s == "secure_majority") return AggregationMode::kSecureMajority;
  if (s == "plaintext_median") return AggregationMode::kPlaintextMedian;
  if (s == "mean" || s == "fedavg") return AggregationMode::kMean;
  if (s == "dp_mean") return AggregationMode::kDpMean;
  if (s == "signsgd_majority" || s == "signsgd") return AggregationMode::kSignSgdMajority;
  throw Error(ErrorCode::kConfig, "unknown aggregation mode: " + s);
}

bool IsBinarizedMode(AggregationMode m) {
  return m == AggregationMode::kSecureMajority ||
         m == AggregationMode::kPlaintextMedian ||
         m == AggregationMode::kSignSgdMajority;
}

void AggregationConfig::Validate() const {
  if (dp.clip < 0 || dp.sigma < 0) throw Error(ErrorCode::kConfig, "dp parameters must be >= 0");
  if (fedprox_mu < 0) throw Error(ErrorCode::kConfig, "fedprox_mu must be >= 0");
  if (SendsCiphertext() && !paillier::IsSupportedKeySize(key_bits)) {
    throw Error(ErrorCode::kConfig, "key_bits must be one of 256/512/1024/2048");
  }
}

quantizer::ThresholdVariant AggregationConfig::EffectiveVariant() const {
  return mode == AggregationMode::kSignSgdMajority ? quantizer::ThresholdVariant::kZero
                                                   : variant;
}

bool AggregationConfig::SendsBinarized() const {
  if (mode == AggregationMode::kSignSgdMajority) return true;
  return IsBinarizedMode(mode) && smartification;
}

bool AggregationConfig::SendsCiphertext() const {
  return mode == AggregationMode::kSecureMajority && SendsBinarized() && encryption;
}

GlobalState GlobalState::Initial(ParameterVector w0, double alpha, double momentum) {
  GlobalState s;
  s.prev_weights = w0;
  s.weights = std::move(w0);
  s.alpha = alpha;
  s.momentum = momentum;
  return s;
}

std::size_t ClientUpdateEnvelope::dimension() const {
  switch (kind) {
    case PayloadKind::kPlain:
      return plain.size();
    case PayloadKind::kBinarized:
      return binarized.size();
    case PayloadKind::kCiphertext:
      return ciphertexts.size();
  }
  return 0;
}

ParameterVector ApplyDp(const ParameterVector& delta, const DpConfig& dp,
                        std::uint64_t seed) {
  ParameterVector out = delta;
  const double norm = Norm2(delta.span());
  if (norm > 0.0) {
    const double factor = std::min(1.0, dp.clip / norm);
    for (auto& v : out) v *= factor;
  }
  if (dp.sigma > 0.0) {
    Rng rng(seed);
    std::normal_distribution<double> noise(0.0, dp.sigma);
    for (auto& v : out) v += noise(rng);
  }
  return out;
}

ClientUpdateEnvelope PackageUpdate(int client_id, const ParameterVector& delta,
                                   const AggregationConfig& cfg,
                                   const paillier::PublicKey* pk,
                                   const threat::AdversarySpec* adversary,
                                   std::uint64_t seed) {
  if (delta.empty()) throw ArgumentError("package_update: empty delta");
  ClientUpdateEnvelope env;
  env.client_id = client_id;
  ParameterVector d = cfg.DpActive() ? ApplyDp(delta, cfg.dp, DeriveSeed(seed, kDpStream))
                                     : delta;
  const std::uint64_t dim = d.size();
  if (!cfg.SendsBinarized()) {
    env.kind = PayloadKind::kPlain;
    env.plain = adversary ? threat::ApplyAdversary(*adversary, d) : std::move(d);
    env.logical_bits = env.wire_bits =
        quantizer::PayloadBits(dim, quantizer::PayloadScheme::kFull32);
    return env;
  }
  quantizer::BinarizedUpdate bin = quantizer::Smartify(d, cfg.EffectiveVariant());
  env.gamma = quantizer::CosineAlignment(d, bin.ToVector()).gamma;
  if (adversary) bin = threat::ApplyAdversary(*adversary, bin);
  env.logical_bits = quantizer::PayloadBits(dim, quantizer::PayloadScheme::kBinarized);
  if (!cfg.SendsCiphertext()) {
    env.kind = PayloadKind::kBinarized;
    env.binarized = std::move(bin);
    env.wire_bits = env.logical_bits;
    return env;
  }
  if (pk == nullptr) throw ProtocolError("package_update: encryption needs a public key");
  env.kind = PayloadKind::kCiphertext;
  env.ciphertexts.reserve(dim);
  for (std::size_t j = 0; j < dim; ++j) {
    env.ciphertexts.push_back(paillier::Encrypt(
        *pk, paillier::SignedPlain(static_cast<long>(bin.signs[j])),
        DeriveSeed(seed, kNonceStream, j)));
  }
  env.wire_bits =
      quantizer::PayloadBits(dim, quantizer::PayloadScheme::kCiphertext, pk->bits);
  return env;
}

ClientUpdateEnvelope ClientRound(int client_id, const GlobalState& global,
                                 const datasim::Dataset& shard,
                                 const AggregationConfig& cfg,
                                 const learners::Learner& learner,
                                 const ClientContext& ctx, std::uint64_t seed) {
  if (shard.empty()) {
    ClientUpdateEnvelope env;
    env.client_id = client_id;
    env.skipped = true;
    return env;
  }
  if (ctx.train == nullptr) throw ArgumentError("client_round: missing train options");
  learners::Learner local = learner;
  local.set_weights(global.weights);
  learners::TrainOptions opts = *ctx.train;
  opts.prox_mu = cfg.fedprox_mu;
  const ParameterVector w_new =
      ctx.adversarial
          ? learners::AdvLocalTrain(local, shard, opts, *ctx.adversarial,
                                    global.weights, seed)
          : learners::LocalTrain(local, shard, opts, global.weights, seed);
  ParameterVector delta(w_new.size());
  for (std::size_t j = 0; j < delta.size(); ++j) delta[j] = w_new[j] - global.weights[j];
  return PackageUpdate(client_id, delta, cfg, ctx.pk, ctx.adversary,
                       DeriveSeed(seed, 0x9A));
}

int SignOfSum(long sum) { return (sum > 0) - (sum < 0); }

ParameterVector CoordinateMedian(const std::vector<ParameterVector>& rows) {
  if (rows.empty()) throw ArgumentError("median: no rows");
  ParameterVector out(rows.front().size());
  std::vector<double> col(rows.size());
  for (std::size_t j = 0; j < out.size(); ++j) {
    for (std::size_t i = 0; i < rows.size(); ++i) col[i] = rows[i][j];
    out[j] = quantizer::Median(col);
  }
  return out;
}

AggregateResult ServerAggregate(const std::vector<ClientUpdateEnvelope>& envelopes,
                                const AggregationConfig& cfg,
                                const paillier::Keypair* keys) {
  std::vector<const ClientUpdateEnvelope*> live;
  for (const auto& e : envelopes) {
    if (!e.skipped) live.push_back(&e);
  }
  if (live.empty()) throw ProtocolError("server_aggregate: no client updates");
  const PayloadKind kind = live.front()->kind;
  const std::size_t dim = live.front()->dimension();
  for (const auto* e : live) {
    if (e->kind != kind) throw ProtocolError("server_aggregate: mixed payload kinds");
    if (e->dimension() != dim) throw ProtocolError("server_aggregate: dimension mismatch");
  }
  const long k = static_cast<long>(live.size());
  AggregateResult res;
  res.clients = static_cast<int>(k);
  res.s_hat = ParameterVector(dim, 0.0);

  if (kind == PayloadKind::kCiphertext) {
    if (cfg.mode != AggregationMode::kSecureMajority) {
      throw ProtocolError("server_aggregate: ciphertexts need secure_majority");
    }
    if (keys == nullptr || keys->sk.lambda == 0) {
      throw ProtocolError("server_aggregate: secure mode requires the secret key");
    }
    std::vector<paillier::Ciphertext> column(live.size());
    for (std::size_t j = 0; j < dim; ++j) {
      for (std::size_t i = 0; i < live.size(); ++i) column[i] = live[i]->ciphertexts[j];
      const paillier::Ciphertext agg = paillier::HomSum(keys->pk, column);
      const paillier::SignedPlain s = paillier::Decrypt(keys->sk, keys->pk, agg);
      if (abs(s.value) > k) {
        throw Error(ErrorCode::kIntegrity,
                    "server_aggregate: decrypted sum exceeds client count");
      }
      res.s_hat[j] = SignOfSum(s.ToLong());
    }
  } else if (kind == PayloadKind::kBinarized) {
    if (cfg.mode == AggregationMode::kPlaintextMedian) {
      std::vector<ParameterVector> rows;
      for (const auto* e : live) rows.push_back(e->binarized.ToVector());
      res.s_hat = CoordinateMedian(rows);
    } else {
      for (std::size_t j = 0; j < dim; ++j) {
        long sum = 0;
        for (const auto* e : live) sum += e->binarized.signs[j];
        res.s_hat[j] = SignOfSum(sum);
      }
    }
  } else {
    std::vector<ParameterVector> rows;
    for (const auto* e : live) rows.push_back(e->plain);
    switch (cfg.mode) {
      case AggregationMode::kMean:
      case AggregationMode::kDpMean:
        res.s_hat = Mean(rows);
        break;
      case AggregationMode::kSecureMajority:
      case AggregationMode::kPlaintextMedian:
        res.s_hat = CoordinateMedian(rows);
        break;
      case AggregationMode::kSignSgdMajority:
        throw ProtocolError("server_aggregate: signSGD needs binarized payloads");
    }
  }
  if (kind != PayloadKind::kPlain) {
    for (double v : res.s_hat) res.tie_count += v == 0.0;
  }
  return res;
}

GlobalState GlobalUpdate(const GlobalState& global, const ParameterVector& s_hat,
                         int divide_by) {
  if (s_hat.size() != global.weights.size() ||
      global.prev_weights.size() != global.weights.size()) {
    throw ArgumentError("global_update: length mismatch");
  }
  GlobalState next = global;
  const double scale = divide_by > 0 ? global.alpha / divide_by : global.alpha;
  for (std::size_t j = 0; j < s_hat.size(); ++j) {
    next.weights[j] = global.weights[j] + scale * s_hat[j] +
                      global.momentum * (global.weights[j] - global.prev_weights[j]);
  }
  next.prev_weights = global.weights;
  next.round = global.round + 1;
  return next;
}

void SimulationConfig::Validate() const {
  aggregation.Validate();
  if (rounds < 0) throw Error(ErrorCode::kConfig, "rounds must be >= 0");
  if (partition.clients < 1) throw Error(ErrorCode::kConfig, "K must be >= 1");
  if (train.epochs < 0) throw Error(ErrorCode::kConfig, "epochs must be >= 0");
  if (train.batch_size < 1) throw Error(ErrorCode::kConfig, "batch must be >= 1");
  if (momentum < 0.0 || momentum >= 1.0) {
    throw Error(ErrorCode::kConfig, "momentum must be in [0, 1)");
  }
  if (smote && smote_k < 1) throw Error(ErrorCode::kConfig, "smote k must be >= 1");
  if (adversarial_training) adv.Validate();
  attack.Validate(data.features);
}

SimulationResult RunSimulation(const SimulationConfig& cfg) {
  cfg.Validate();
  SimulationResult result;
  const auto tt = datasim::GenerateTrainTest(cfg.data, cfg.test_per_class,
                                             DeriveSeed(cfg.seed, kDataStream));
  const auto plan =
      datasim::Partition(tt.train, cfg.partition, DeriveSeed(cfg.seed, kPartitionStream));
  result.partition_repaired = plan.repaired;
  std::vector<datasim::Dataset> shards = plan.Shards(tt.train);
  const int k = cfg.partition.clients;
  for (int i = 0; i < k; ++i) {
    if (cfg.attack.kind == threat::AdversaryKind::kBackdoor &&
        cfg.attack.IsMalicious(i, k)) {
      shards[i] = threat::ApplyAdversary(cfg.attack, shards[i],
                                         DeriveSeed(cfg.seed, kPoisonStream, i));
    }
    if (cfg.smote && !shards[i].empty()) {
      shards[i] = learners::SmoteBalance(shards[i], cfg.smote_k,
                                         DeriveSeed(cfg.seed, kSmoteStream, i))
                      .data;
    }
  }

  learners::Learner learner =
      cfg.model == learners::ModelKind::kLogReg
          ? learners::Learner::LogReg(cfg.data.features, cfg.data.classes)
          : learners::Learner::Mlp(cfg.data.features, cfg.hidden, cfg.data.classes,
                                   DeriveSeed(cfg.seed, kInitStream));
  result.dimension = learner.num_params();
  result.initial_weights = learner.weights();
  GlobalState state = GlobalState::Initial(learner.weights(), cfg.alpha, cfg.momentum);

  std::optional<paillier::Keypair> keys;
  if (cfg.aggregation.SendsCiphertext()) {
    keys = paillier::Keygen(cfg.aggregation.key_bits, DeriveSeed(cfg.seed, kKeyStream));
  }

  const bool backdoor = cfg.attack.kind == threat::AdversaryKind::kBackdoor &&
                        cfg.attack.NumMalicious(k) > 0;
  std::uint64_t logical_cum = 0, wire_cum = 0;
  const std::uint64_t round_master = DeriveSeed(cfg.seed, kRoundStream);
  for (int r = 0; r < cfg.rounds; ++r) {
    std::vector<ClientUpdateEnvelope> envelopes;
    envelopes.reserve(k);
    try {
      for (int i = 0; i < k; ++i) {
        ClientContext ctx;
        ctx.train = &cfg.train;
        ctx.adversarial = cfg.adversarial_training ? &cfg.adv : nullptr;
        ctx.pk = keys ? &keys->pk : nullptr;
        const bool payload_attack = cfg.attack.kind == threat::AdversaryKind::kSignFlip ||
                                    cfg.attack.kind == threat::AdversaryKind::kScale;
        ctx.adversary =
            payload_attack && cfg.attack.IsMalicious(i, k) ? &cfg.attack : nullptr;
        envelopes.push_back(ClientRound(i, state, shards[i], cfg.aggregation, learner,
                                        ctx, DeriveSeed(round_master, r, i)));
      }
    } catch (const Error& e) {
      if (e.code() != ErrorCode::kDivergence) throw;
      result.diverged = true;
      result.diagnostic = "round " + std::to_string(r) + ": " + e.what();
      break;
    }
    const AggregateResult agg =
        ServerAggregate(envelopes, cfg.aggregation, keys ? &*keys : nullptr);
    const int divide_by =
        cfg.aggregation.normalize_by_k && cfg.aggregation.SendsBinarized() ? agg.clients : 0;
    state = GlobalUpdate(state, agg.s_hat, divide_by);
    if (!state.weights.AllFinite()) {
      result.diverged = true;
      result.diagnostic = "round " + std::to_string(r) + ": non-finite global weights";
      break;
    }
    learner.set_weights(state.weights);

    RoundReport rep;
    rep.round = r + 1;
    const auto train_eval = learners::Evaluate(learner, tt.train);
    const auto test_eval = learners::Evaluate(learner, tt.test);
    rep.train_acc = train_eval.accuracy;
    rep.test_acc = test_eval.accuracy;
    rep.macro_f1 = test_eval.macro_f1;
    rep.per_class_f1 = test_eval.per_class_f1;
    int skipped = 0;
    std::vector<double> gammas;
    for (const auto& e : envelopes) {
      if (e.skipped) {
        ++skipped;
        continue;
      }
      logical_cum += e.logical_bits;
      wire_cum += e.wire_bits;
      if (e.gamma) gammas.push_back(*e.gamma);
    }
    result.skipped_clients = std::max(result.skipped_clients, skipped);
    rep.logical_bits_cum = logical_cum;
    rep.wire_bits_cum = wire_cum;
    if (!gammas.empty()) {
      double m = 0.0;
      for (double g : gammas) m += g;
      m /= static_cast<double>(gammas.size());
      double v = 0.0;
      for (double g : gammas) v += (g - m) * (g - m);
      rep.gamma_mean = m;
      rep.gamma_std = std::sqrt(v / static_cast<double>(gammas.size()));
    }
    rep.tie_count = agg.tie_count;
    if (backdoor) rep.asr = threat::MeasureAsr(learner, cfg.attack, tt.test).asr;
    if (skipped > 0) rep.notes = "skipped_clients=" + std::to_string(skipped);
    result.reports.push_back(std::move(rep));
  }
  result.final_weights = state.weights;
  return result;
}

}  // namespace safefl::protocol
