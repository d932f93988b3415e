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

#ifndef SAFEFL_DATASIM_HPP_
#define SAFEFL_DATASIM_HPP_

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "safefl/common.hpp"

namespace safefl::datasim {

// Row-major N x F feature matrix in [0, 1] with labels in [0, C).
struct Dataset {
  std::size_t num_features = 0;
  int num_classes = 0;
  std::vector<double> features;
  std::vector<int> labels;
  std::vector<std::string> class_names;

  std::size_t size() const noexcept { return labels.size(); }
  bool empty() const noexcept { return labels.empty(); }
  std::span<const double> row(std::size_t i) const {
    return {features.data() + i * num_features, num_features};
  }
  std::span<double> row(std::size_t i) {
    return {features.data() + i * num_features, num_features};
  }
  void Append(std::span<const double> x, int y);
  std::vector<std::size_t> ClassCounts() const;
  Dataset Subset(std::span<const std::size_t> indices) const;
};

struct GenerateParams {
  int classes = 7;
  std::size_t features = 20;
  std::size_t per_class = 200;
  double separation = 3.0;
  // Multiplier applied to the per-class count of minority classes (the upper
  // half of the label range). 1 means balanced.
  double imbalance_ratio = 1.0;
  double noise_stddev = 1.0;
};

// Gaussian mixture with one unit-variance component per class, min-max scaled
// to [0, 1] and shuffled.
Dataset Generate(const GenerateParams& params, std::uint64_t seed);

// Same mixture split into train/test parts drawn from one scaling.
struct TrainTest {
  Dataset train;
  Dataset test;
};
TrainTest GenerateTrainTest(const GenerateParams& params,
                            std::size_t test_per_class, std::uint64_t seed);

enum class PartitionScheme { kIid, kDirichlet, kLabelSkew };

struct PartitionParams {
  PartitionScheme scheme = PartitionScheme::kIid;
  int clients = 10;
  double dirichlet_alpha = 1.0;
  int dominant_min = 2;
  int dominant_max = 3;
  double dominant_prob = 0.7;
  int max_retries = 100;
};

std::string ToString(PartitionScheme s);
PartitionScheme ParsePartitionScheme(const std::string& s);

struct PartitionPlan {
  PartitionScheme scheme = PartitionScheme::kIid;
  int clients = 0;
  std::vector<int> assignment;  // client id per sample
  // Set when bounded redraws failed and empty clients were filled by moving
  // samples from the largest shard.
  bool repaired = false;

  std::vector<Dataset> Shards(const Dataset& ds) const;
};

PartitionPlan Partition(const Dataset& ds, const PartitionParams& params,
                        std::uint64_t seed);

// Header: f0,...,f{F-1},label.
void SaveCsv(const Dataset& ds, const std::string& path);
Dataset LoadCsv(const std::string& path);

}  // namespace safefl::datasim

#endif  // SAFEFL_DATASIM_HPP_
