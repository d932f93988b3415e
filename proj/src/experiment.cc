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

#include "safefl/experiment.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

#include "json.hpp"
#include "safefl/guard.hpp"
#include "safefl/paillier.hpp"

namespace safefl::experiment {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;
using protocol::AggregationMode;

// Cap used when averaging PSNR values that include exact reconstructions.
constexpr double kPsnrCapDb = 100.0;

constexpr std::uint64_t kInversionStream = 0x1A;

Error ConfigError(const std::string& path, const std::string& msg) {
  return Error(ErrorCode::kConfig, "config field '" + path + "': " + msg);
}

std::string Fmt(double x) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, res.ptr);
}

template <typename T>
T Read(const json& obj, const std::string& key, const std::string& path, T fallback) {
  if (!obj.contains(key)) return fallback;
  const json& v = obj.at(key);
  const std::string p = path.empty() ? key : path + "." + key;
  try {
    if constexpr (std::is_same_v<T, bool>) {
      if (!v.is_boolean()) throw ConfigError(p, "expected boolean");
    } else if constexpr (std::is_same_v<T, std::string>) {
      if (!v.is_string()) throw ConfigError(p, "expected string");
    } else if constexpr (std::is_integral_v<T>) {
      if (!v.is_number_integer()) throw ConfigError(p, "expected integer");
      if constexpr (std::is_unsigned_v<T>) {
        if (v.get<long long>() < 0) throw ConfigError(p, "expected non-negative integer");
      }
    } else {
      if (!v.is_number()) throw ConfigError(p, "expected number");
    }
    return v.get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(p, e.what());
  }
}

void CheckKeys(const json& obj, const std::string& path,
               std::initializer_list<const char*> allowed) {
  if (!obj.is_object()) throw ConfigError(path.empty() ? "<root>" : path, "expected object");
  std::set<std::string> ok(allowed.begin(), allowed.end());
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    if (!ok.count(it.key())) {
      throw ConfigError(path.empty() ? it.key() : path + "." + it.key(), "unknown field");
    }
  }
}

template <typename Fn>
auto Wrap(const std::string& path, Fn fn) {
  try {
    return fn();
  } catch (const Error& e) {
    if (std::string(e.what()).rfind("config field", 0) == 0) throw;
    throw ConfigError(path, e.what());
  }
}

void WriteFile(const fs::path& path, const std::string& content,
               std::vector<std::string>& artifacts) {
  fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path.string());
  out << content;
  artifacts.push_back(path.string());
}

json OptionalNumber(const std::optional<double>& v) {
  return v ? json(*v) : json(nullptr);
}

json OptionalInt(const std::optional<int>& v) { return v ? json(*v) : json(nullptr); }

std::uint64_t Fnv1a(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::optional<int> RoundsToFractionOfFinal(const std::vector<protocol::RoundReport>& r,
                                           double fraction) {
  if (r.empty()) return std::nullopt;
  return RoundsToAccuracy(r, fraction * r.back().test_acc);
}

double CappedPsnr(double v) { return std::min(v, kPsnrCapDb); }

// FedAvg-style modes apply the mean delta directly unless told otherwise.
void SetModeDefaults(ExperimentConfig& cfg) {
  const auto m = cfg.sim.aggregation.mode;
  const bool mean_mode = m == AggregationMode::kMean || m == AggregationMode::kDpMean;
  if (!cfg.alpha_explicit) cfg.sim.alpha = mean_mode ? 1.0 : 1e-3;
  if (!cfg.momentum_explicit) cfg.sim.momentum = mean_mode ? 0.0 : 0.9;
}

}  // namespace

protocol::SimulationConfig ExperimentConfig::Effective(std::uint64_t seed) const {
  protocol::SimulationConfig s = sim;
  s.aggregation.encryption = toggles.encryption;
  s.aggregation.smartification = toggles.smartification;
  s.aggregation.dp.enabled = toggles.dp;
  s.smote = toggles.smote;
  s.adversarial_training = toggles.adversarial_training;
  s.seed = seed;
  return s;
}

std::string ExperimentConfig::CanonicalJson() const {
  const protocol::SimulationConfig s = Effective(0);
  json j;
  j["model"] = {{"kind", learners::ToString(s.model)}, {"hidden", s.hidden}};
  j["data"] = {{"classes", s.data.classes},
               {"features", s.data.features},
               {"per_class", s.data.per_class},
               {"test_per_class", s.test_per_class},
               {"separation", s.data.separation},
               {"imbalance_ratio", s.data.imbalance_ratio},
               {"noise_stddev", s.data.noise_stddev}};
  j["K"] = s.partition.clients;
  j["rounds"] = s.rounds;
  j["mode"] = protocol::ToString(s.aggregation.mode);
  j["variant"] = quantizer::ToString(s.aggregation.variant);
  j["key_bits"] = s.aggregation.key_bits;
  j["normalize_by_k"] = s.aggregation.normalize_by_k;
  j["dp"] = {{"clip", s.aggregation.dp.clip}, {"sigma", s.aggregation.dp.sigma}};
  j["fedprox_mu"] = s.aggregation.fedprox_mu;
  j["alpha"] = s.alpha;
  j["momentum"] = s.momentum;
  j["partition"] = {{"scheme", datasim::ToString(s.partition.scheme)},
                    {"alpha", s.partition.dirichlet_alpha},
                    {"dominant_min", s.partition.dominant_min},
                    {"dominant_max", s.partition.dominant_max},
                    {"dominant_prob", s.partition.dominant_prob}};
  j["train"] = {{"epochs", s.train.epochs},
                {"batch", s.train.batch_size},
                {"lr", s.train.learning_rate},
                {"optimizer", s.train.optimizer == learners::Optimizer::kAdam ? "adam" : "sgd"}};
  j["adv"] = {{"epsilon", s.adv.epsilon}, {"steps", s.adv.steps}, {"lambda", s.adv.lambda_adv}};
  j["smote_k"] = s.smote_k;
  j["attack"] = {{"kind", threat::ToString(s.attack.kind)},
                 {"fraction", s.attack.fraction},
                 {"scale", s.attack.scale_factor},
                 {"trigger_coords", s.attack.trigger_coords},
                 {"trigger_value", s.attack.trigger_value},
                 {"target_label", s.attack.target_label},
                 {"poison_fraction", s.attack.poison_fraction}};
  j["toggles"] = {{"encryption", toggles.encryption},
                  {"smartification", toggles.smartification},
                  {"smote", toggles.smote},
                  {"dp", toggles.dp},
                  {"adversarial_training", toggles.adversarial_training},
                  {"guard", toggles.guard}};
  j["targets"] = targets;
  j["d"] = bench_dims;
  j["keygen"] = {{"bits", keygen_bits}};
  j["inversion"] = {{"trials", inversion.trials},
                    {"iterations", inversion.iterations},
                    {"warmup_rounds", inversion.warmup_rounds}};
  j["guard"] = {{"input", guard.input}, {"tau", guard.tau}};
  return j.dump();
}

std::string ExperimentConfig::Hash() const {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(Fnv1a(CanonicalJson())));
  return buf;
}

ExperimentConfig ParseConfig(const std::string& json_text) {
  json root;
  try {
    root = json::parse(json_text.empty() ? std::string("{}") : json_text);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kConfig, std::string("config is not valid JSON: ") + e.what());
  }
  CheckKeys(root, "",
            {"model", "d", "K", "rounds", "mode", "variant", "key_bits", "normalize_by_k",
             "dp", "fedprox_mu", "alpha", "momentum", "partition", "attack", "seeds",
             "data", "train", "adv", "smote_k", "toggles", "targets", "keygen",
             "inversion", "guard"});
  ExperimentConfig cfg;
  auto& s = cfg.sim;

  // Full-scale defaults; toy experiments override them.
  s.partition.clients = 50;
  s.rounds = 100;
  s.train = learners::TrainOptions{5, 32, 1e-3, 0.0, learners::Optimizer::kSgd};
  s.attack.trigger_coords.clear();

  if (root.contains("model")) {
    const json& m = root["model"];
    if (m.is_string()) {
      s.model = Wrap("model", [&] { return learners::ParseModelKind(m.get<std::string>()); });
    } else {
      CheckKeys(m, "model", {"kind", "hidden"});
      s.model = Wrap("model.kind", [&] {
        return learners::ParseModelKind(Read<std::string>(m, "kind", "model", "logreg"));
      });
      s.hidden = Read<std::size_t>(m, "hidden", "model", s.hidden);
    }
  }
  if (root.contains("data")) {
    const json& d = root["data"];
    CheckKeys(d, "data", {"classes", "features", "per_class", "test_per_class",
                          "separation", "imbalance_ratio", "noise_stddev"});
    s.data.classes = Read<int>(d, "classes", "data", s.data.classes);
    s.data.features = Read<std::size_t>(d, "features", "data", s.data.features);
    s.data.per_class = Read<std::size_t>(d, "per_class", "data", s.data.per_class);
    s.test_per_class = Read<std::size_t>(d, "test_per_class", "data", s.test_per_class);
    s.data.separation = Read<double>(d, "separation", "data", s.data.separation);
    s.data.imbalance_ratio = Read<double>(d, "imbalance_ratio", "data", s.data.imbalance_ratio);
    s.data.noise_stddev = Read<double>(d, "noise_stddev", "data", s.data.noise_stddev);
  }
  if (s.data.classes < 2) throw ConfigError("data.classes", "must be >= 2");
  if (s.data.features < 2) throw ConfigError("data.features", "must be >= 2");
  if (s.data.per_class < 1) throw ConfigError("data.per_class", "must be >= 1");
  if (!(s.data.imbalance_ratio > 0 && s.data.imbalance_ratio <= 1)) {
    throw ConfigError("data.imbalance_ratio", "must be in (0, 1]");
  }

  s.partition.clients = Read<int>(root, "K", "", s.partition.clients);
  if (s.partition.clients < 1) throw ConfigError("K", "must be >= 1");
  s.rounds = Read<int>(root, "rounds", "", s.rounds);
  if (s.rounds < 0) throw ConfigError("rounds", "must be >= 0");
  if (root.contains("mode")) {
    s.aggregation.mode = Wrap("mode", [&] {
      return protocol::ParseAggregationMode(Read<std::string>(root, "mode", "", ""));
    });
  }
  if (root.contains("variant")) {
    s.aggregation.variant = Wrap("variant", [&] {
      return quantizer::ParseVariant(Read<std::string>(root, "variant", "", ""));
    });
  }
  s.aggregation.key_bits = Read<unsigned>(root, "key_bits", "", s.aggregation.key_bits);
  if (!paillier::IsSupportedKeySize(s.aggregation.key_bits)) {
    throw ConfigError("key_bits", "must be one of 256, 512, 1024, 2048");
  }
  s.aggregation.normalize_by_k =
      Read<bool>(root, "normalize_by_k", "", s.aggregation.normalize_by_k);

  if (root.contains("dp")) {
    const json& d = root["dp"];
    if (d.is_boolean()) {
      cfg.toggles.dp = d.get<bool>();
    } else {
      CheckKeys(d, "dp", {"enabled", "clip", "sigma"});
      cfg.toggles.dp = Read<bool>(d, "enabled", "dp", cfg.toggles.dp);
      s.aggregation.dp.clip = Read<double>(d, "clip", "dp", s.aggregation.dp.clip);
      s.aggregation.dp.sigma = Read<double>(d, "sigma", "dp", s.aggregation.dp.sigma);
      if (s.aggregation.dp.clip < 0) throw ConfigError("dp.clip", "must be >= 0");
      if (s.aggregation.dp.sigma < 0) throw ConfigError("dp.sigma", "must be >= 0");
    }
  }
  s.aggregation.fedprox_mu = Read<double>(root, "fedprox_mu", "", s.aggregation.fedprox_mu);
  if (s.aggregation.fedprox_mu < 0) throw ConfigError("fedprox_mu", "must be >= 0");

  cfg.alpha_explicit = root.contains("alpha");
  cfg.momentum_explicit = root.contains("momentum");
  SetModeDefaults(cfg);
  s.alpha = Read<double>(root, "alpha", "", s.alpha);
  s.momentum = Read<double>(root, "momentum", "", s.momentum);
  if (s.momentum < 0 || s.momentum >= 1) throw ConfigError("momentum", "must be in [0, 1)");

  if (root.contains("partition")) {
    const json& p = root["partition"];
    if (p.is_string()) {
      s.partition.scheme = Wrap("partition", [&] {
        return datasim::ParsePartitionScheme(p.get<std::string>());
      });
    } else {
      CheckKeys(p, "partition",
                {"scheme", "alpha", "dominant_min", "dominant_max", "dominant_prob"});
      s.partition.scheme = Wrap("partition.scheme", [&] {
        return datasim::ParsePartitionScheme(Read<std::string>(p, "scheme", "partition", "iid"));
      });
      s.partition.dirichlet_alpha =
          Read<double>(p, "alpha", "partition", s.partition.dirichlet_alpha);
      s.partition.dominant_min = Read<int>(p, "dominant_min", "partition", s.partition.dominant_min);
      s.partition.dominant_max = Read<int>(p, "dominant_max", "partition", s.partition.dominant_max);
      s.partition.dominant_prob =
          Read<double>(p, "dominant_prob", "partition", s.partition.dominant_prob);
      if (!(s.partition.dirichlet_alpha > 0)) throw ConfigError("partition.alpha", "must be > 0");
    }
  }
  if (static_cast<std::size_t>(s.partition.clients) > s.data.per_class) {
    throw ConfigError("K", "must not exceed data.per_class so every client gets data");
  }

  if (root.contains("attack")) {
    const json& a = root["attack"];
    CheckKeys(a, "attack", {"kind", "fraction", "scale", "trigger_coords", "trigger_value",
                            "target_label", "poison_fraction"});
    s.attack.kind = Wrap("attack.kind", [&] {
      return threat::ParseAdversaryKind(Read<std::string>(a, "kind", "attack", "none"));
    });
    s.attack.fraction = Read<double>(a, "fraction", "attack", 0.2);
    s.attack.scale_factor = Read<double>(a, "scale", "attack", s.attack.scale_factor);
    s.attack.trigger_value = Read<double>(a, "trigger_value", "attack", s.attack.trigger_value);
    s.attack.target_label = Read<int>(a, "target_label", "attack", s.attack.target_label);
    s.attack.poison_fraction =
        Read<double>(a, "poison_fraction", "attack", s.attack.poison_fraction);
    if (a.contains("trigger_coords")) {
      if (!a["trigger_coords"].is_array()) throw ConfigError("attack.trigger_coords", "expected array");
      for (const auto& c : a["trigger_coords"]) {
        if (!c.is_number_unsigned()) {
          throw ConfigError("attack.trigger_coords", "expected non-negative integers");
        }
        s.attack.trigger_coords.push_back(c.get<std::size_t>());
      }
    }
    if (s.attack.fraction < 0 || s.attack.fraction > 1) {
      throw ConfigError("attack.fraction", "must be in [0, 1]");
    }
    if (s.attack.target_label < 0 || s.attack.target_label >= s.data.classes) {
      throw ConfigError("attack.target_label", "outside class range");
    }
  }
  // Default trigger: the last three feature columns, which carry no class
  // signal in the synthetic mixture.
  if (s.attack.trigger_coords.empty()) {
    for (std::size_t f = s.data.features >= 3 ? s.data.features - 3 : 0; f < s.data.features; ++f) {
      s.attack.trigger_coords.push_back(f);
    }
  }
  for (std::size_t c : s.attack.trigger_coords) {
    if (c >= s.data.features) throw ConfigError("attack.trigger_coords", "outside feature range");
  }

  if (root.contains("seeds")) {
    if (!root["seeds"].is_array() || root["seeds"].empty()) {
      throw ConfigError("seeds", "expected non-empty array of integers");
    }
    cfg.seeds.clear();
    for (const auto& v : root["seeds"]) {
      if (!v.is_number_unsigned()) throw ConfigError("seeds", "expected non-negative integers");
      cfg.seeds.push_back(v.get<std::uint64_t>());
    }
  }
  if (root.contains("train")) {
    const json& t = root["train"];
    CheckKeys(t, "train", {"epochs", "batch", "lr", "optimizer"});
    s.train.epochs = Read<int>(t, "epochs", "train", s.train.epochs);
    s.train.batch_size = Read<std::size_t>(t, "batch", "train", s.train.batch_size);
    s.train.learning_rate = Read<double>(t, "lr", "train", s.train.learning_rate);
    const std::string opt = Read<std::string>(t, "optimizer", "train", "sgd");
    if (opt == "sgd") {
      s.train.optimizer = learners::Optimizer::kSgd;
    } else if (opt == "adam") {
      s.train.optimizer = learners::Optimizer::kAdam;
    } else {
      throw ConfigError("train.optimizer", "expected 'sgd' or 'adam'");
    }
    if (s.train.epochs < 0) throw ConfigError("train.epochs", "must be >= 0");
    if (s.train.batch_size < 1) throw ConfigError("train.batch", "must be >= 1");
  }
  if (root.contains("adv")) {
    const json& a = root["adv"];
    CheckKeys(a, "adv", {"epsilon", "steps", "lambda", "step_size"});
    s.adv.epsilon = Read<double>(a, "epsilon", "adv", s.adv.epsilon);
    s.adv.steps = Read<int>(a, "steps", "adv", s.adv.steps);
    s.adv.lambda_adv = Read<double>(a, "lambda", "adv", s.adv.lambda_adv);
    s.adv.step_size = Read<double>(a, "step_size", "adv", s.adv.step_size);
    Wrap("adv", [&] {
      s.adv.Validate();
      return 0;
    });
  }
  s.smote_k = Read<int>(root, "smote_k", "", s.smote_k);
  if (s.smote_k < 1) throw ConfigError("smote_k", "must be >= 1");
  if (root.contains("toggles")) {
    const json& t = root["toggles"];
    CheckKeys(t, "toggles",
              {"encryption", "smartification", "smote", "dp", "adversarial_training", "guard"});
    auto& g = cfg.toggles;
    g.encryption = Read<bool>(t, "encryption", "toggles", g.encryption);
    g.smartification = Read<bool>(t, "smartification", "toggles", g.smartification);
    g.smote = Read<bool>(t, "smote", "toggles", g.smote);
    g.dp = Read<bool>(t, "dp", "toggles", g.dp);
    g.adversarial_training =
        Read<bool>(t, "adversarial_training", "toggles", g.adversarial_training);
    g.guard = Read<bool>(t, "guard", "toggles", g.guard);
  }
  if (root.contains("targets")) {
    if (!root["targets"].is_array()) throw ConfigError("targets", "expected array");
    cfg.targets.clear();
    for (const auto& v : root["targets"]) {
      if (!v.is_number() || v.get<double>() <= 0 || v.get<double>() > 1) {
        throw ConfigError("targets", "each target must be in (0, 1]");
      }
      cfg.targets.push_back(v.get<double>());
    }
  }
  if (root.contains("d")) {
    const json& d = root["d"];
    cfg.bench_dims.clear();
    auto push = [&](const json& v) {
      if (!v.is_number_unsigned() || v.get<std::uint64_t>() < 1) {
        throw ConfigError("d", "dimensions must be positive integers");
      }
      cfg.bench_dims.push_back(v.get<std::uint64_t>());
    };
    if (d.is_array()) {
      for (const auto& v : d) push(v);
    } else {
      push(d);
    }
  }
  if (root.contains("keygen")) {
    CheckKeys(root["keygen"], "keygen", {"bits"});
    cfg.keygen_bits = Read<unsigned>(root["keygen"], "bits", "keygen", cfg.keygen_bits);
    if (!paillier::IsSupportedKeySize(cfg.keygen_bits)) {
      throw ConfigError("keygen.bits", "must be one of 256, 512, 1024, 2048");
    }
  }
  if (root.contains("inversion")) {
    const json& v = root["inversion"];
    CheckKeys(v, "inversion", {"trials", "iterations", "warmup_rounds"});
    cfg.inversion.trials = Read<int>(v, "trials", "inversion", cfg.inversion.trials);
    cfg.inversion.iterations = Read<int>(v, "iterations", "inversion", cfg.inversion.iterations);
    cfg.inversion.warmup_rounds =
        Read<int>(v, "warmup_rounds", "inversion", cfg.inversion.warmup_rounds);
    if (cfg.inversion.trials < 1) throw ConfigError("inversion.trials", "must be >= 1");
  }
  if (root.contains("guard")) {
    const json& g = root["guard"];
    CheckKeys(g, "guard", {"input", "tau"});
    cfg.guard.input = Read<std::string>(g, "input", "guard", cfg.guard.input);
    cfg.guard.tau = Read<double>(g, "tau", "guard", cfg.guard.tau);
    if (cfg.guard.tau < 0 || cfg.guard.tau > 1) throw ConfigError("guard.tau", "must be in [0, 1]");
  }
  return cfg;
}

void ApplyOverrides(ExperimentConfig& cfg, const Overrides& o) {
  if (o.seed) cfg.seeds = {*o.seed};
  if (o.mode) {
    cfg.sim.aggregation.mode =
        Wrap("mode", [&] { return protocol::ParseAggregationMode(*o.mode); });
    SetModeDefaults(cfg);
  }
}

std::optional<int> RoundsToAccuracy(const std::vector<protocol::RoundReport>& reports,
                                    double target) {
  for (const auto& r : reports) {
    if (r.test_acc >= target) return r.round;
  }
  return std::nullopt;
}

std::string FormatRoundCsv(const std::vector<protocol::RoundReport>& reports) {
  std::string out = std::string(kRoundCsvHeader) + "\n";
  for (const auto& r : reports) {
    out += std::to_string(r.round) + "," + Fmt(r.test_acc) + "," + Fmt(r.macro_f1) + "," +
           std::to_string(r.logical_bits_cum) + "," + std::to_string(r.wire_bits_cum) + "," +
           (r.gamma_mean ? Fmt(*r.gamma_mean) : "") + "," + (r.asr ? Fmt(*r.asr) : "") + "," +
           r.notes + "\n";
  }
  return out;
}

std::string FormatPerClassCsv(const std::vector<protocol::RoundReport>& reports) {
  std::string out = "round,train_acc";
  const std::size_t classes = reports.empty() ? 0 : reports.front().per_class_f1.size();
  for (std::size_t c = 0; c < classes; ++c) out += ",f1_class" + std::to_string(c);
  out += ",gamma_std,tie_count\n";
  for (const auto& r : reports) {
    out += std::to_string(r.round) + "," + Fmt(r.train_acc);
    for (double f : r.per_class_f1) out += "," + Fmt(f);
    out += "," + (r.gamma_std ? Fmt(*r.gamma_std) : std::string()) + "," +
           std::to_string(r.tie_count) + "\n";
  }
  return out;
}

std::string SimulationSummaryJson(const ExperimentConfig& cfg, std::uint64_t seed,
                                  const protocol::SimulationResult& result) {
  const auto s = cfg.Effective(seed);
  nlohmann::ordered_json j;
  j["config_hash"] = cfg.Hash();
  j["seed"] = seed;
  j["mode"] = protocol::ToString(s.aggregation.mode);
  j["variant"] = quantizer::ToString(s.aggregation.EffectiveVariant());
  j["encryption"] = s.aggregation.SendsCiphertext();
  j["dimension"] = result.dimension;
  j["clients"] = s.partition.clients;
  j["rounds_completed"] = result.reports.size();
  j["diverged"] = result.diverged;
  j["diagnostic"] = result.diagnostic;
  j["partition_repaired"] = result.partition_repaired;
  if (!result.reports.empty()) {
    const auto& last = result.reports.back();
    j["final_test_acc"] = last.test_acc;
    j["final_train_acc"] = last.train_acc;
    j["final_macro_f1"] = last.macro_f1;
    j["final_per_class_f1"] = last.per_class_f1;
    j["logical_bits_cum"] = last.logical_bits_cum;
    j["wire_bits_cum"] = last.wire_bits_cum;
    j["final_asr"] = OptionalNumber(last.asr);
  } else {
    j["final_test_acc"] = nullptr;
  }
  const std::size_t client_rounds =
      result.reports.size() * static_cast<std::size_t>(s.partition.clients);
  if (client_rounds > 0) {
    j["logical_bits_per_client_round"] =
        result.reports.back().logical_bits_cum / client_rounds;
    j["wire_bits_per_client_round"] = result.reports.back().wire_bits_cum / client_rounds;
  }
  nlohmann::ordered_json markers;
  for (double t : cfg.targets) {
    char key[32];
    std::snprintf(key, sizeof(key), "R%g", t * 100.0);
    markers[key] = OptionalInt(RoundsToAccuracy(result.reports, t));
  }
  j["rounds_to_target"] = markers;
  j["rounds_to_95pct_of_final"] = OptionalInt(RoundsToFractionOfFinal(result.reports, 0.95));
  double gsum = 0.0;
  int gcount = 0;
  for (const auto& r : result.reports) {
    if (r.gamma_mean) {
      gsum += *r.gamma_mean;
      ++gcount;
    }
  }
  j["gamma_mean_over_rounds"] = gcount ? json(gsum / gcount) : json(nullptr);
  // Raw DP parameters only; no (epsilon, delta) accounting is performed.
  j["dp"] = {{"enabled", s.aggregation.DpActive()},
             {"clip", s.aggregation.dp.clip},
             {"sigma", s.aggregation.dp.sigma},
             {"rounds", result.reports.size()}};
  return j.dump(2) + "\n";
}

InversionSummary RunInversionTrials(const ExperimentConfig& cfg, std::uint64_t seed) {
  const auto s = cfg.Effective(seed);
  const auto tt = datasim::GenerateTrainTest(s.data, std::max<std::size_t>(s.test_per_class, 1),
                                             DeriveSeed(seed, 1));
  learners::Learner learner =
      s.model == learners::ModelKind::kLogReg
          ? learners::Learner::LogReg(s.data.features, s.data.classes)
          : learners::Learner::Mlp(s.data.features, s.hidden, s.data.classes,
                                   DeriveSeed(seed, 5));
  if (cfg.inversion.warmup_rounds > 0) {
    learners::TrainOptions opts = s.train;
    opts.epochs = cfg.inversion.warmup_rounds;
    learner.set_weights(learners::LocalTrain(learner, tt.train, opts, learner.weights(),
                                             DeriveSeed(seed, kInversionStream, 1)));
  }
  threat::InversionOptions inv;
  inv.iterations = cfg.inversion.iterations;
  InversionSummary out;
  out.trials = cfg.inversion.trials;
  Rng rng(DeriveSeed(seed, kInversionStream, 2));
  std::uniform_int_distribution<std::size_t> pick(0, tt.test.size() - 1);
  double full_sum = 0.0, bin_sum = 0.0;
  int full_hits = 0, bin_hits = 0;
  for (int t = 0; t < cfg.inversion.trials; ++t) {
    const std::size_t idx = pick(rng);
    const auto x = tt.test.row(idx);
    const int y = tt.test.labels[idx];
    const ParameterVector g = learner.SampleGrad(x, y);
    ParameterVector update(g.size());
    for (std::size_t j = 0; j < g.size(); ++j) update[j] = -s.train.learning_rate * g[j];
    const auto bin = quantizer::Smartify(update, s.aggregation.EffectiveVariant());
    const auto full_rec =
        threat::InvertGradient(g, learner, inv, DeriveSeed(seed, kInversionStream, 100 + t));
    const auto bin_rec =
        threat::InvertGradient(bin, learner, inv, DeriveSeed(seed, kInversionStream, 100 + t));
    const double pf = threat::Psnr(x, full_rec.reconstruction);
    const double pb = threat::Psnr(x, bin_rec.reconstruction);
    if (std::isinf(pf)) ++out.full_infinite;
    full_sum += CappedPsnr(pf);
    bin_sum += CappedPsnr(pb);
    full_hits += full_rec.label == y;
    bin_hits += bin_rec.label == y;
    out.truths.emplace_back(x.begin(), x.end());
    out.full_reconstructions.push_back(full_rec.reconstruction);
    out.binarized_reconstructions.push_back(bin_rec.reconstruction);
  }
  out.full_psnr_mean = full_sum / out.trials;
  out.binarized_psnr_mean = bin_sum / out.trials;
  out.full_label_recovery = static_cast<double>(full_hits) / out.trials;
  out.binarized_label_recovery = static_cast<double>(bin_hits) / out.trials;
  return out;
}

PoisonSummary RunPoisonComparison(const ExperimentConfig& cfg, std::uint64_t seed) {
  ExperimentConfig base = cfg;
  if (base.sim.attack.kind != threat::AdversaryKind::kBackdoor) {
    base.sim.attack.kind = threat::AdversaryKind::kBackdoor;
    if (base.sim.attack.fraction == 0.0) base.sim.attack.fraction = 0.2;
  }
  ExperimentConfig mean_cfg = base;
  mean_cfg.sim.aggregation.mode = AggregationMode::kMean;
  mean_cfg.sim.alpha = 1.0;
  mean_cfg.sim.momentum = 0.0;
  ExperimentConfig median_cfg = base;
  if (!protocol::IsBinarizedMode(median_cfg.sim.aggregation.mode)) {
    median_cfg.sim.aggregation.mode = AggregationMode::kSecureMajority;
  }
  PoisonSummary out;
  const auto rm = protocol::RunSimulation(mean_cfg.Effective(seed));
  const auto rd = protocol::RunSimulation(median_cfg.Effective(seed));
  if (rm.diverged || rd.diverged) {
    throw Error(ErrorCode::kDivergence, "attack-poison: " + rm.diagnostic + rd.diagnostic);
  }
  if (!rm.reports.empty()) {
    out.asr_mean_mode = rm.reports.back().asr.value_or(0.0);
    out.clean_acc_mean_mode = rm.reports.back().test_acc;
  }
  if (!rd.reports.empty()) {
    out.asr_median_mode = rd.reports.back().asr.value_or(0.0);
    out.clean_acc_median_mode = rd.reports.back().test_acc;
  }
  return out;
}

namespace {

CommandResult Keygen(const ExperimentConfig& cfg, const fs::path& base) {
  CommandResult res;
  for (std::uint64_t seed : cfg.seeds) {
    const auto kp = paillier::Keygen(cfg.keygen_bits, seed);
    const fs::path dir = base / ("seed-" + std::to_string(seed));
    WriteFile(dir / "keypair.json", paillier::KeypairToJson(kp) + "\n", res.artifacts);
    WriteFile(dir / "public_key.json", paillier::PublicKeyToJson(kp.pk) + "\n", res.artifacts);
  }
  return res;
}

CommandResult Simulate(const ExperimentConfig& cfg, const fs::path& base) {
  CommandResult res;
  for (std::uint64_t seed : cfg.seeds) {
    const auto result = protocol::RunSimulation(cfg.Effective(seed));
    const fs::path dir = base / ("seed-" + std::to_string(seed));
    WriteFile(dir / "rounds.csv", FormatRoundCsv(result.reports), res.artifacts);
    WriteFile(dir / "per_class.csv", FormatPerClassCsv(result.reports), res.artifacts);
    WriteFile(dir / "summary.json", SimulationSummaryJson(cfg, seed, result), res.artifacts);
    if (result.diverged) {
      res.code = ExitCode::kDivergence;
      res.message = "seed " + std::to_string(seed) + " diverged: " + result.diagnostic;
      WriteFile(dir / "failure.txt", res.message + "\n", res.artifacts);
      return res;
    }
  }
  return res;
}

struct AblationRow {
  std::string name;
  std::string disabled;
  ExperimentConfig cfg;
};

double GuardAbstainRate(const ExperimentConfig& cfg, bool guard_on,
                        std::optional<std::size_t>& claims) {
  if (cfg.guard.input.empty()) return 0.0;
  std::ifstream in(cfg.guard.input);
  if (!in) throw Error(ErrorCode::kConfig, "config field 'guard.input': cannot read file");
  std::stringstream ss;
  ss << in.rdbuf();
  const auto rows = guard::ScoreBatch(ss.str(), cfg.guard.tau);
  claims = rows.size();
  if (!guard_on || rows.empty()) return 0.0;
  std::size_t abstain = 0;
  for (const auto& r : rows) abstain += r.decision == guard::Decision::kAbstainOrRegenerate;
  return static_cast<double>(abstain) / static_cast<double>(rows.size());
}

CommandResult Ablate(const ExperimentConfig& cfg, const fs::path& base) {
  CommandResult res;
  std::vector<AblationRow> rows;
  rows.push_back({"full", "none", cfg});
  auto add = [&](bool on, const char* name, const char* what, auto mutate) {
    if (!on) return;
    AblationRow r{std::string("-") + name, what, cfg};
    mutate(r.cfg.toggles);
    rows.push_back(std::move(r));
  };
  const Toggles& t = cfg.toggles;
  add(t.encryption, "encryption", "paillier", [](Toggles& x) { x.encryption = false; });
  add(t.smartification, "smartification", "binarization",
      [](Toggles& x) { x.smartification = false; });
  add(t.smote, "smote", "class balancing", [](Toggles& x) { x.smote = false; });
  add(t.guard, "guard", "misinformation guard", [](Toggles& x) { x.guard = false; });
  add(t.adversarial_training, "adversarial_training", "robustness head",
      [](Toggles& x) { x.adversarial_training = false; });
  add(t.dp, "dp", "differential privacy", [](Toggles& x) { x.dp = false; });
  {
    AblationRow fedavg{"fedavg", "all", cfg};
    fedavg.cfg.toggles = Toggles{false, false, false, false, false, false};
    fedavg.cfg.sim.aggregation.mode = AggregationMode::kMean;
    fedavg.cfg.sim.alpha = 1.0;
    fedavg.cfg.sim.momentum = 0.0;
    rows.push_back(std::move(fedavg));
  }
  for (std::uint64_t seed : cfg.seeds) {
    const fs::path dir = base / ("seed-" + std::to_string(seed));
    std::string csv =
        "configuration,components_disabled,acc,macro_f1,comm_logical_mb,comm_wire_mb,"
        "psnr_db,guard_abstain_rate\n";
    nlohmann::ordered_json summary = nlohmann::ordered_json::array();
    for (const auto& row : rows) {
      const auto result = protocol::RunSimulation(row.cfg.Effective(seed));
      if (result.diverged) {
        res.code = ExitCode::kDivergence;
        res.message = "ablation row " + row.name + " diverged: " + result.diagnostic;
        WriteFile(dir / "failure.txt", res.message + "\n", res.artifacts);
        return res;
      }
      const auto eff = row.cfg.Effective(seed);
      const double acc = result.reports.empty() ? 0.0 : result.reports.back().test_acc;
      const double f1 = result.reports.empty() ? 0.0 : result.reports.back().macro_f1;
      const double logical_mb =
          result.reports.empty() ? 0.0 : result.reports.back().logical_bits_cum / 8e6;
      const double wire_mb =
          result.reports.empty() ? 0.0 : result.reports.back().wire_bits_cum / 8e6;
      // A compromised server sees plaintext payloads only when encryption is off.
      std::optional<double> psnr;
      if (!eff.aggregation.SendsCiphertext()) {
        const auto inv = RunInversionTrials(row.cfg, seed);
        psnr = eff.aggregation.SendsBinarized() ? inv.binarized_psnr_mean : inv.full_psnr_mean;
      }
      std::optional<std::size_t> claims;
      const double abstain = GuardAbstainRate(row.cfg, row.cfg.toggles.guard, claims);
      csv += row.name + "," + row.disabled + "," + Fmt(acc) + "," + Fmt(f1) + "," +
             Fmt(logical_mb) + "," + Fmt(wire_mb) + "," +
             (psnr ? Fmt(*psnr) : std::string("ciphertext-only")) + "," +
             (claims ? Fmt(abstain) : std::string("")) + "\n";
      nlohmann::ordered_json j;
      j["configuration"] = row.name;
      j["components_disabled"] = row.disabled;
      j["final_test_acc"] = acc;
      j["final_macro_f1"] = f1;
      j["comm_logical_mb"] = logical_mb;
      j["comm_wire_mb"] = wire_mb;
      j["psnr_db"] = OptionalNumber(psnr);
      j["guard_abstain_rate"] = claims ? json(abstain) : json(nullptr);
      j["trajectory_acc"] = json::array();
      for (const auto& r : result.reports) j["trajectory_acc"].push_back(r.test_acc);
      summary.push_back(j);
    }
    WriteFile(dir / "ablation.csv", csv, res.artifacts);
    WriteFile(dir / "ablation.json", summary.dump(2) + "\n", res.artifacts);
  }
  return res;
}

CommandResult AttackInversion(const ExperimentConfig& cfg, const fs::path& base) {
  CommandResult res;
  for (std::uint64_t seed : cfg.seeds) {
    const auto inv = RunInversionTrials(cfg, seed);
    const fs::path dir = base / ("seed-" + std::to_string(seed));
    nlohmann::ordered_json j;
    j["seed"] = seed;
    j["trials"] = inv.trials;
    j["full_precision_psnr_mean_db"] = inv.full_psnr_mean;
    j["binarized_psnr_mean_db"] = inv.binarized_psnr_mean;
    j["psnr_gap_db"] = inv.full_psnr_mean - inv.binarized_psnr_mean;
    j["full_precision_exact_reconstructions"] = inv.full_infinite;
    j["psnr_cap_db"] = kPsnrCapDb;
    j["full_precision_label_recovery"] = inv.full_label_recovery;
    j["binarized_label_recovery"] = inv.binarized_label_recovery;
    j["encrypted_payload_psnr"] = "not attackable: ciphertext contents unreadable";
    WriteFile(dir / "inversion.json", j.dump(2) + "\n", res.artifacts);
    std::string csv = "trial,feature,truth,full_precision,binarized\n";
    for (std::size_t t = 0; t < inv.truths.size(); ++t) {
      for (std::size_t f = 0; f < inv.truths[t].size(); ++f) {
        csv += std::to_string(t) + "," + std::to_string(f) + "," + Fmt(inv.truths[t][f]) +
               "," + Fmt(inv.full_reconstructions[t][f]) + "," +
               Fmt(inv.binarized_reconstructions[t][f]) + "\n";
      }
    }
    WriteFile(dir / "inversion_pairs.csv", csv, res.artifacts);
  }
  return res;
}

CommandResult AttackPoison(const ExperimentConfig& cfg, const fs::path& base) {
  CommandResult res;
  for (std::uint64_t seed : cfg.seeds) {
    const auto p = RunPoisonComparison(cfg, seed);
    nlohmann::ordered_json j;
    j["seed"] = seed;
    j["attack"] = "backdoor";
    j["malicious_fraction"] = cfg.sim.attack.kind == threat::AdversaryKind::kBackdoor
                                  ? cfg.sim.attack.fraction
                                  : 0.2;
    j["asr_mean_aggregation"] = p.asr_mean_mode;
    j["asr_median_aggregation"] = p.asr_median_mode;
    j["clean_acc_mean_aggregation"] = p.clean_acc_mean_mode;
    j["clean_acc_median_aggregation"] = p.clean_acc_median_mode;
    WriteFile(base / ("seed-" + std::to_string(seed)) / "poison.json", j.dump(2) + "\n",
              res.artifacts);
  }
  return res;
}

CommandResult BenchCompression(const ExperimentConfig& cfg, const fs::path& base) {
  CommandResult res;
  std::string csv = "d,full32_bits,binarized_bits,ratio,ciphertext_bits,key_bits\n";
  for (std::uint64_t d : cfg.bench_dims) {
    const auto full = quantizer::PayloadBits(d, quantizer::PayloadScheme::kFull32);
    const auto bin = quantizer::PayloadBits(d, quantizer::PayloadScheme::kBinarized);
    const auto ct =
        quantizer::PayloadBits(d, quantizer::PayloadScheme::kCiphertext, cfg.keygen_bits);
    csv += std::to_string(d) + "," + std::to_string(full) + "," + std::to_string(bin) + "," +
           Fmt(static_cast<double>(full) / static_cast<double>(bin)) + "," +
           std::to_string(ct) + "," + std::to_string(cfg.keygen_bits) + "\n";
  }
  WriteFile(base / "compression.csv", csv, res.artifacts);
  return res;
}

CommandResult GuardScore(const ExperimentConfig& cfg, const fs::path& base) {
  CommandResult res;
  if (cfg.guard.input.empty()) {
    throw Error(ErrorCode::kConfig, "config field 'guard.input': required for guard-score");
  }
  std::ifstream in(cfg.guard.input);
  if (!in) throw Error(ErrorCode::kConfig, "config field 'guard.input': cannot read file");
  std::stringstream ss;
  ss << in.rdbuf();
  const auto rows = guard::ScoreBatch(ss.str(), cfg.guard.tau);
  WriteFile(base / "guard_scores.csv", guard::FormatBatch(rows), res.artifacts);
  std::size_t abstain = 0;
  for (const auto& r : rows) abstain += r.decision == guard::Decision::kAbstainOrRegenerate;
  nlohmann::ordered_json j;
  j["tau"] = cfg.guard.tau;
  j["claims"] = rows.size();
  j["abstain_or_regenerate"] = abstain;
  j["abstain_rate"] = rows.empty() ? 0.0 : static_cast<double>(abstain) / rows.size();
  WriteFile(base / "guard_summary.json", j.dump(2) + "\n", res.artifacts);
  return res;
}

}  // namespace

CommandResult RunCommand(const std::string& subcommand, const std::string& config_json,
                         const std::string& out_dir, const Overrides& overrides) {
  CommandResult res;
  try {
    const bool known = std::find(std::begin(kSubcommands), std::end(kSubcommands),
                                 subcommand) != std::end(kSubcommands);
    if (!known) {
      res.code = ExitCode::kConfig;
      res.message = "unknown subcommand: " + subcommand;
      return res;
    }
    ExperimentConfig cfg = ParseConfig(config_json);
    ApplyOverrides(cfg, overrides);
    const fs::path base = fs::path(out_dir) / cfg.Hash();
    if (subcommand == "keygen") return Keygen(cfg, base);
    if (subcommand == "simulate") return Simulate(cfg, base);
    if (subcommand == "ablate") return Ablate(cfg, base);
    if (subcommand == "attack-inversion") return AttackInversion(cfg, base);
    if (subcommand == "attack-poison") return AttackPoison(cfg, base);
    if (subcommand == "bench-compression") return BenchCompression(cfg, base);
    return GuardScore(cfg, base);
  } catch (const Error& e) {
    switch (e.code()) {
      case ErrorCode::kConfig:
      case ErrorCode::kArgument:
      case ErrorCode::kRange:
        res.code = ExitCode::kConfig;
        break;
      case ErrorCode::kDivergence:
        res.code = ExitCode::kDivergence;
        break;
      default:
        res.code = ExitCode::kInternal;
    }
    res.message = e.what();
  } catch (const std::exception& e) {
    res.code = ExitCode::kInternal;
    res.message = e.what();
  }
  return res;
}

}  // namespace safefl::experiment
