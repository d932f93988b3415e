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

#ifndef SAFEFL_COMMON_HPP_
#define SAFEFL_COMMON_HPP_

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace safefl {

// Error categories surfaced through the C API as status codes.
enum class ErrorCode : int {
  kOk = 0,
  kArgument = 1,
  kConfig = 2,
  kDivergence = 3,
  kInternal = 4,
  kRange = 5,
  kCiphertext = 6,
  kProtocol = 7,
  kIntegrity = 8,
  kKeyGeneration = 9,
  kIo = 10,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}
  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

inline Error ArgumentError(const std::string& msg) {
  return Error(ErrorCode::kArgument, msg);
}

// Flat real vector of model coordinates or model deltas.
class ParameterVector {
 public:
  ParameterVector() = default;
  explicit ParameterVector(std::size_t d, double fill = 0.0) : v_(d, fill) {}
  explicit ParameterVector(std::vector<double> v) : v_(std::move(v)) {}
  ParameterVector(std::initializer_list<double> v) : v_(v) {}

  std::size_t size() const noexcept { return v_.size(); }
  bool empty() const noexcept { return v_.empty(); }
  double& operator[](std::size_t i) { return v_[i]; }
  double operator[](std::size_t i) const { return v_[i]; }
  std::span<double> span() noexcept { return v_; }
  std::span<const double> span() const noexcept { return v_; }
  const std::vector<double>& values() const noexcept { return v_; }
  std::vector<double>& values() noexcept { return v_; }
  auto begin() noexcept { return v_.begin(); }
  auto end() noexcept { return v_.end(); }
  auto begin() const noexcept { return v_.begin(); }
  auto end() const noexcept { return v_.end(); }

  bool AllFinite() const {
    for (double x : v_) {
      if (!std::isfinite(x)) return false;
    }
    return true;
  }

  bool operator==(const ParameterVector&) const = default;

 private:
  std::vector<double> v_;
};

double Dot(std::span<const double> a, std::span<const double> b);
double Norm2(std::span<const double> a);

// Deterministic seed derivation. Mixes (master, a, b) through splitmix64 so
// that per-client seeds do not depend on scheduling order.
std::uint64_t SplitMix64(std::uint64_t x);
std::uint64_t DeriveSeed(std::uint64_t master, std::uint64_t a,
                         std::uint64_t b = 0);

using Rng = std::mt19937_64;

}  // namespace safefl

#endif  // SAFEFL_COMMON_HPP_
