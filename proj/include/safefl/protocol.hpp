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

#ifndef SAFEFL_PROTOCOL_HPP_
#define SAFEFL_PROTOCOL_HPP_

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "safefl/common.hpp"
#include "safefl/datasim.hpp"
#include "safefl/learners.hpp"
#include "safefl/paillier.hpp"
#include "safefl/quantizer.hpp"
#include "safefl/threat.hpp"

// One round of secure binarized aggregation:
//   local delta -> (optional DP) -> smartify -> encrypt -> homomorphic sum
//   -> decrypt -> sign-of-sum decode -> momentum update
// plus plaintext baseline aggregators (FedAvg mean, DP mean, signSGD, literal
// coordinate median).
namespace safefl::protocol {

enum class AggregationMode {
  kSecureMajority,
  kPlaintextMedian,
  kMean,
  kDpMean,
  kSignSgdMajority,
};

std::string ToString(AggregationMode m);
AggregationMode ParseAggregationMode(const std::string& s);
bool IsBinarizedMode(AggregationMode m);

struct DpConfig {
  bool enabled = false;
  double clip = 0.1;
  double sigma = 0.01;
};

struct AggregationConfig {
  AggregationMode mode = AggregationMode::kSecureMajority;
  quantizer::ThresholdVariant variant = quantizer::ThresholdVariant::kAbsMedian;
  bool encryption = true;
  bool smartification = true;
  DpConfig dp;
  double fedprox_mu = 0.0;
  unsigned key_bits = 512;
  // Divide the decoded median output by K before the global update.
  bool normalize_by_k = false;

  void Validate() const;
  // Threshold actually used: signSGD forces the zero threshold.
  quantizer::ThresholdVariant EffectiveVariant() const;
  bool SendsBinarized() const;
  bool SendsCiphertext() const;
  bool DpActive() const { return dp.enabled || mode == AggregationMode::kDpMean; }
};

struct GlobalState {
  ParameterVector weights;
  ParameterVector prev_weights;
  int round = 0;
  double alpha = 1e-3;
  double momentum = 0.9;

  // W^(-1) := W^(0) so the first momentum term vanishes.
  static GlobalState Initial(ParameterVector w0, double alpha, double momentum);
};

enum class PayloadKind { kPlain, kBinarized, kCiphertext };

struct ClientUpdateEnvelope {
  int client_id = 0;
  // Set when the client had no data; never aggregated.
  bool skipped = false;
  PayloadKind kind = PayloadKind::kPlain;
  ParameterVector plain;
  quantizer::BinarizedUpdate binarized;
  std::vector<paillier::Ciphertext> ciphertexts;
  std::uint64_t logical_bits = 0;
  std::uint64_t wire_bits = 0;
  // Cosine between the client's delta and its binarized form.
  std::optional<double> gamma;

  std::size_t dimension() const;
};

// Clip to C_clip in L2 and add N(0, sigma^2 I).
ParameterVector ApplyDp(const ParameterVector& delta, const DpConfig& dp,
                        std::uint64_t seed);

// Wraps an already-computed delta into an envelope: DP, smartification,
// adversarial payload corruption, and encryption, with bit counters set.
ClientUpdateEnvelope PackageUpdate(int client_id, const ParameterVector& delta,
                                   const AggregationConfig& cfg,
                                   const paillier::PublicKey* pk,
                                   const threat::AdversarySpec* adversary,
                                   std::uint64_t seed);

struct ClientContext {
  const learners::TrainOptions* train = nullptr;
  const learners::AdvConfig* adversarial = nullptr;  // null disables
  const paillier::PublicKey* pk = nullptr;
  const threat::AdversarySpec* adversary = nullptr;  // null for honest clients
};

// Local training from the broadcast state followed by PackageUpdate.
ClientUpdateEnvelope ClientRound(int client_id, const GlobalState& global,
                                 const datasim::Dataset& shard,
                                 const AggregationConfig& cfg,
                                 const learners::Learner& learner,
                                 const ClientContext& ctx, std::uint64_t seed);

struct AggregateResult {
  ParameterVector s_hat;
  int tie_count = 0;  // coordinates decoded to 0
  int clients = 0;
};

// Decode rule for +-1 inputs: sign of the sum, 0 on ties. Equals the
// coordinate-wise median of the +-1 values.
int SignOfSum(long sum);

// Coordinate-wise median over clients (even count: midpoint of middle pair).
ParameterVector CoordinateMedian(const std::vector<ParameterVector>& rows);

AggregateResult ServerAggregate(const std::vector<ClientUpdateEnvelope>& envelopes,
                                const AggregationConfig& cfg,
                                const paillier::Keypair* keys);

// W^(r+1) = W^(r) + alpha * s' + mu * (W^(r) - W^(r-1)), with s' = s_hat / K
// when `divide_by` > 0.
GlobalState GlobalUpdate(const GlobalState& global, const ParameterVector& s_hat,
                         int divide_by = 0);

struct SimulationConfig {
  datasim::GenerateParams data;
  std::size_t test_per_class = 100;
  learners::ModelKind model = learners::ModelKind::kLogReg;
  std::size_t hidden = 16;
  datasim::PartitionParams partition;
  int rounds = 50;
  learners::TrainOptions train;
  AggregationConfig aggregation;
  double alpha = 1e-3;
  double momentum = 0.9;
  bool smote = false;
  int smote_k = 5;
  bool adversarial_training = false;
  learners::AdvConfig adv;
  threat::AdversarySpec attack;
  std::uint64_t seed = 1;

  void Validate() const;
};

struct RoundReport {
  int round = 0;
  double train_acc = 0.0;
  double test_acc = 0.0;
  double macro_f1 = 0.0;
  std::vector<double> per_class_f1;
  std::uint64_t logical_bits_cum = 0;
  std::uint64_t wire_bits_cum = 0;
  std::optional<double> gamma_mean;
  std::optional<double> gamma_std;
  int tie_count = 0;
  std::optional<double> asr;
  std::string notes;
};

struct SimulationResult {
  std::vector<RoundReport> reports;
  ParameterVector final_weights;
  ParameterVector initial_weights;
  bool diverged = false;
  std::string diagnostic;
  std::size_t dimension = 0;
  int skipped_clients = 0;
  bool partition_repaired = false;
};

SimulationResult RunSimulation(const SimulationConfig& cfg);

}  // namespace safefl::protocol

#endif  // SAFEFL_PROTOCOL_HPP_
