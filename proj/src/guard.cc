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

#include "safefl/guard.hpp"

#include <charconv>
#include <sstream>

#include "safefl/common.hpp"

namespace safefl::guard {
namespace {

double ParseDouble(const std::string& s, std::size_t line) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw Error(ErrorCode::kConfig,
                "guard csv line " + std::to_string(line) + ": bad number '" + s + "'");
  }
}

std::string Trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace

void ClaimEvidence::Validate() const {
  if (nli_scores.empty()) throw ArgumentError("faith_score: empty evidence set");
  for (double s : nli_scores) {
    if (!(s >= 0.0 && s <= 1.0)) throw ArgumentError("faith_score: nli score outside [0, 1]");
  }
  if (!(confidence >= 0.0 && confidence <= 1.0)) {
    throw ArgumentError("faith_score: confidence outside [0, 1]");
  }
  if (!(threshold >= 0.0 && threshold <= 1.0)) {
    throw ArgumentError("faith_score: threshold outside [0, 1]");
  }
}

std::string ToString(Decision d) {
  return d == Decision::kPass ? "pass" : "abstain_or_regenerate";
}

double FaithScore(const ClaimEvidence& ce) {
  ce.Validate();
  double sum = 0.0;
  for (double s : ce.nli_scores) sum += s;
  return ce.confidence * (sum / static_cast<double>(ce.nli_scores.size()));
}

Decision GuardDecision(double score, double tau) {
  return score >= tau ? Decision::kPass : Decision::kAbstainOrRegenerate;
}

std::vector<BatchRow> ScoreBatch(const std::string& csv_text, double tau) {
  std::vector<BatchRow> rows;
  std::istringstream in(csv_text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    line = Trim(line);
    if (line.empty()) continue;
    if (lineno == 1 && line.rfind("nli", 0) == 0) continue;
    const auto comma = line.rfind(',');
    if (comma == std::string::npos) {
      throw Error(ErrorCode::kConfig,
                  "guard csv line " + std::to_string(lineno) + ": expected 2 columns");
    }
    ClaimEvidence ce;
    ce.threshold = tau;
    ce.confidence = ParseDouble(Trim(line.substr(comma + 1)), lineno);
    std::istringstream scores(line.substr(0, comma));
    std::string cell;
    while (std::getline(scores, cell, ';')) {
      cell = Trim(cell);
      if (!cell.empty()) ce.nli_scores.push_back(ParseDouble(cell, lineno));
    }
    BatchRow row;
    row.score = FaithScore(ce);
    row.decision = GuardDecision(row.score, tau);
    rows.push_back(row);
  }
  return rows;
}

std::string FormatBatch(const std::vector<BatchRow>& rows) {
  std::string out = "score,decision\n";
  char buf[64];
  for (const auto& r : rows) {
    auto res = std::to_chars(buf, buf + sizeof(buf), r.score);
    out.append(buf, res.ptr);
    out += ',';
    out += ToString(r.decision);
    out += '\n';
  }
  return out;
}

}  // namespace safefl::guard
