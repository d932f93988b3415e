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

#include "safefl/datasim.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>

namespace safefl::datasim {
namespace {

std::string FormatDouble(double x) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, res.ptr);
}

std::size_t MinorityCount(std::size_t per_class, double ratio) {
  const auto n = static_cast<std::size_t>(std::llround(per_class * ratio));
  return std::max<std::size_t>(1, n);
}

// Class mean directions: axis vectors first, then random unit vectors.
std::vector<std::vector<double>> ClassMeans(const GenerateParams& p, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<std::vector<double>> means(p.classes,
                                         std::vector<double>(p.features, 0.0));
  for (int c = 0; c < p.classes; ++c) {
    if (static_cast<std::size_t>(c) < p.features) {
      means[c][c] = p.separation;
      continue;
    }
    double norm = 0.0;
    for (auto& v : means[c]) {
      v = normal(rng);
      norm += v * v;
    }
    norm = std::sqrt(norm);
    for (auto& v : means[c]) v *= p.separation / norm;
  }
  return means;
}

bool IsMinority(int c, int classes) { return c >= (classes + 1) / 2; }

void Sample(const GenerateParams& p, const std::vector<std::vector<double>>& means,
            std::size_t per_class, Rng& rng, Dataset& out) {
  std::normal_distribution<double> normal(0.0, p.noise_stddev);
  std::vector<double> x(p.features);
  for (int c = 0; c < p.classes; ++c) {
    const std::size_t count = (p.imbalance_ratio < 1.0 && IsMinority(c, p.classes))
                                  ? MinorityCount(per_class, p.imbalance_ratio)
                                  : per_class;
    for (std::size_t i = 0; i < count; ++i) {
      for (std::size_t f = 0; f < p.features; ++f) x[f] = means[c][f] + normal(rng);
      out.Append(x, c);
    }
  }
}

void Shuffle(Dataset& ds, Rng& rng) {
  std::vector<std::size_t> idx(ds.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::shuffle(idx.begin(), idx.end(), rng);
  ds = ds.Subset(idx);
}

void Validate(const GenerateParams& p) {
  if (p.classes < 2) throw ArgumentError("generate: classes must be >= 2");
  if (p.features < 2) throw ArgumentError("generate: features must be >= 2");
  if (p.per_class < 1) throw ArgumentError("generate: per_class must be >= 1");
  if (p.imbalance_ratio <= 0.0 || p.imbalance_ratio > 1.0) {
    throw ArgumentError("generate: imbalance_ratio must be in (0, 1]");
  }
}

std::vector<int> AssignIid(std::size_t n, int k, Rng& rng) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::shuffle(idx.begin(), idx.end(), rng);
  std::vector<int> a(n);
  for (std::size_t i = 0; i < n; ++i) a[idx[i]] = static_cast<int>(i % k);
  return a;
}

std::vector<double> DrawDirichlet(double alpha, int k, Rng& rng) {
  std::gamma_distribution<double> gamma(alpha, 1.0);
  std::vector<double> p(k);
  double sum = 0.0;
  for (auto& v : p) {
    v = gamma(rng);
    sum += v;
  }
  if (!(sum > 0.0)) {
    // All draws underflowed; the limit of Dir(alpha -> 0) is a random vertex.
    std::uniform_int_distribution<int> pick(0, k - 1);
    std::fill(p.begin(), p.end(), 0.0);
    p[pick(rng)] = 1.0;
    return p;
  }
  for (auto& v : p) v /= sum;
  return p;
}

std::vector<int> AssignDirichlet(const Dataset& ds, int k, double alpha,
                                 Rng& rng) {
  std::vector<int> a(ds.size(), 0);
  for (int c = 0; c < ds.num_classes; ++c) {
    std::vector<std::size_t> members;
    for (std::size_t i = 0; i < ds.size(); ++i) {
      if (ds.labels[i] == c) members.push_back(i);
    }
    std::shuffle(members.begin(), members.end(), rng);
    const std::vector<double> props = DrawDirichlet(alpha, k, rng);
    // Cumulative split points.
    std::size_t start = 0;
    double cum = 0.0;
    for (int client = 0; client < k; ++client) {
      cum += props[client];
      const std::size_t end =
          client == k - 1 ? members.size()
                          : std::min(members.size(),
                                     static_cast<std::size_t>(std::llround(
                                         cum * members.size())));
      for (std::size_t i = start; i < end; ++i) a[members[i]] = client;
      start = std::max(start, end);
    }
  }
  return a;
}

std::vector<int> AssignLabelSkew(const Dataset& ds, const PartitionParams& p,
                                 Rng& rng) {
  const int k = p.clients;
  const int classes = ds.num_classes;
  std::vector<std::vector<double>> mass(k, std::vector<double>(classes, 0.0));
  std::uniform_int_distribution<int> dom_count(p.dominant_min, p.dominant_max);
  for (int client = 0; client < k; ++client) {
    std::vector<int> order(classes);
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    const int nd = std::min(dom_count(rng), classes);
    const int rest = classes - nd;
    for (int i = 0; i < classes; ++i) {
      if (i < nd) {
        mass[client][order[i]] = p.dominant_prob / nd;
      } else {
        mass[client][order[i]] = (1.0 - p.dominant_prob) / rest;
      }
    }
    if (rest == 0) {
      for (int i = 0; i < classes; ++i) mass[client][i] = 1.0 / classes;
    }
  }
  std::vector<int> a(ds.size(), 0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const int c = ds.labels[i];
    double total = 0.0;
    for (int client = 0; client < k; ++client) total += mass[client][c];
    double u = unif(rng) * total;
    int chosen = k - 1;
    for (int client = 0; client < k; ++client) {
      u -= mass[client][c];
      if (u < 0.0) {
        chosen = client;
        break;
      }
    }
    a[i] = chosen;
  }
  return a;
}

bool AllClientsNonEmpty(const std::vector<int>& a, int k) {
  std::vector<std::size_t> counts(k, 0);
  for (int c : a) ++counts[c];
  return std::all_of(counts.begin(), counts.end(),
                     [](std::size_t n) { return n > 0; });
}

// Moves single samples from the largest shard into each empty shard.
void RepairEmpty(std::vector<int>& a, int k, Rng& rng) {
  std::vector<std::vector<std::size_t>> members(k);
  for (std::size_t i = 0; i < a.size(); ++i) members[a[i]].push_back(i);
  for (int client = 0; client < k; ++client) {
    if (!members[client].empty()) continue;
    auto largest = std::max_element(
        members.begin(), members.end(),
        [](const auto& x, const auto& y) { return x.size() < y.size(); });
    std::uniform_int_distribution<std::size_t> pick(0, largest->size() - 1);
    const std::size_t pos = pick(rng);
    const std::size_t sample = (*largest)[pos];
    largest->erase(largest->begin() + pos);
    members[client].push_back(sample);
    a[sample] = client;
  }
}

}  // namespace

void Dataset::Append(std::span<const double> x, int y) {
  if (x.size() != num_features) throw ArgumentError("dataset: feature width");
  features.insert(features.end(), x.begin(), x.end());
  labels.push_back(y);
}

std::vector<std::size_t> Dataset::ClassCounts() const {
  std::vector<std::size_t> counts(num_classes, 0);
  for (int y : labels) ++counts[y];
  return counts;
}

Dataset Dataset::Subset(std::span<const std::size_t> indices) const {
  Dataset out;
  out.num_features = num_features;
  out.num_classes = num_classes;
  out.class_names = class_names;
  out.features.reserve(indices.size() * num_features);
  out.labels.reserve(indices.size());
  for (std::size_t i : indices) out.Append(row(i), labels[i]);
  return out;
}

TrainTest GenerateTrainTest(const GenerateParams& params,
                            std::size_t test_per_class, std::uint64_t seed) {
  Validate(params);
  Rng rng(seed);
  const auto means = ClassMeans(params, rng);
  TrainTest tt;
  for (Dataset* ds : {&tt.train, &tt.test}) {
    ds->num_features = params.features;
    ds->num_classes = params.classes;
  }
  Sample(params, means, params.per_class, rng, tt.train);
  if (test_per_class > 0) {
    GenerateParams balanced = params;
    balanced.imbalance_ratio = 1.0;
    Sample(balanced, means, test_per_class, rng, tt.test);
  }
  // Min-max scaling fitted on the training part, clamped on both.
  for (std::size_t f = 0; f < params.features; ++f) {
    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    for (std::size_t i = 0; i < tt.train.size(); ++i) {
      lo = std::min(lo, tt.train.row(i)[f]);
      hi = std::max(hi, tt.train.row(i)[f]);
    }
    const double width = hi > lo ? hi - lo : 1.0;
    for (Dataset* ds : {&tt.train, &tt.test}) {
      for (std::size_t i = 0; i < ds->size(); ++i) {
        double& v = ds->row(i)[f];
        v = std::clamp((v - lo) / width, 0.0, 1.0);
      }
    }
  }
  Shuffle(tt.train, rng);
  if (!tt.test.empty()) Shuffle(tt.test, rng);
  return tt;
}

Dataset Generate(const GenerateParams& params, std::uint64_t seed) {
  return GenerateTrainTest(params, 0, seed).train;
}

std::string ToString(PartitionScheme s) {
  switch (s) {
    case PartitionScheme::kIid:
      return "iid";
    case PartitionScheme::kDirichlet:
      return "dirichlet";
    case PartitionScheme::kLabelSkew:
      return "label_skew";
  }
  return "iid";
}

PartitionScheme ParsePartitionScheme(const std::string& s) {
  if (s == "iid") return PartitionScheme::kIid;
  if (s == "dirichlet") return PartitionScheme::kDirichlet;
  if (s == "label_skew" || s == "label-skew") return PartitionScheme::kLabelSkew;
  throw Error(ErrorCode::kConfig, "unknown partition scheme: " + s);
}

std::vector<Dataset> PartitionPlan::Shards(const Dataset& ds) const {
  std::vector<std::vector<std::size_t>> members(clients);
  for (std::size_t i = 0; i < assignment.size(); ++i) {
    members[assignment[i]].push_back(i);
  }
  std::vector<Dataset> shards;
  shards.reserve(clients);
  for (const auto& m : members) shards.push_back(ds.Subset(m));
  return shards;
}

PartitionPlan Partition(const Dataset& ds, const PartitionParams& params,
                        std::uint64_t seed) {
  const int k = params.clients;
  if (k < 1) throw ArgumentError("partition: clients must be >= 1");
  if (ds.empty()) throw ArgumentError("partition: empty dataset");
  if (static_cast<std::size_t>(k) * std::max(1, ds.num_classes) > ds.size()) {
    throw ArgumentError("partition: need K <= N / C to keep clients non-empty");
  }
  if (params.scheme == PartitionScheme::kDirichlet && !(params.dirichlet_alpha > 0)) {
    throw ArgumentError("partition: dirichlet alpha must be > 0");
  }
  if (params.scheme == PartitionScheme::kLabelSkew &&
      (params.dominant_min < 1 || params.dominant_max < params.dominant_min ||
       params.dominant_prob < 0.0 || params.dominant_prob > 1.0)) {
    throw ArgumentError("partition: bad label-skew parameters");
  }
  Rng rng(seed);
  PartitionPlan plan;
  plan.scheme = params.scheme;
  plan.clients = k;
  for (int attempt = 0; attempt <= params.max_retries; ++attempt) {
    switch (params.scheme) {
      case PartitionScheme::kIid:
        plan.assignment = AssignIid(ds.size(), k, rng);
        break;
      case PartitionScheme::kDirichlet:
        plan.assignment = AssignDirichlet(ds, k, params.dirichlet_alpha, rng);
        break;
      case PartitionScheme::kLabelSkew:
        plan.assignment = AssignLabelSkew(ds, params, rng);
        break;
    }
    if (AllClientsNonEmpty(plan.assignment, k)) return plan;
  }
  RepairEmpty(plan.assignment, k, rng);
  plan.repaired = true;
  return plan;
}

void SaveCsv(const Dataset& ds, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path);
  for (std::size_t f = 0; f < ds.num_features; ++f) out << 'f' << f << ',';
  out << "label\n";
  for (std::size_t i = 0; i < ds.size(); ++i) {
    for (double v : ds.row(i)) out << FormatDouble(v) << ',';
    out << ds.labels[i] << '\n';
  }
}

Dataset LoadCsv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot read " + path);
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorCode::kIo, "empty csv " + path);
  Dataset ds;
  ds.num_features = static_cast<std::size_t>(
      std::count(line.begin(), line.end(), ','));
  std::vector<double> x(ds.num_features);
  int max_label = -1;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    for (std::size_t f = 0; f < ds.num_features; ++f) {
      if (!std::getline(ss, cell, ',')) throw Error(ErrorCode::kIo, "short row");
      x[f] = std::stod(cell);
    }
    if (!std::getline(ss, cell, ',')) throw Error(ErrorCode::kIo, "missing label");
    const int y = std::stoi(cell);
    if (y < 0) throw Error(ErrorCode::kIo, "negative label");
    max_label = std::max(max_label, y);
    ds.Append(x, y);
  }
  ds.num_classes = max_label + 1;
  return ds;
}

}  // namespace safefl::datasim
