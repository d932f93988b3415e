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

// Command-line front end. Talks to the library only through the C API.

#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "safefl/safefl.h"

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitInternal = 4;

const char* const kCommands[][2] = {
    {"keygen", "generate a Paillier keypair (keypair.json, public_key.json)"},
    {"simulate", "run federated training; writes rounds.csv, per_class.csv, summary.json"},
    {"ablate", "toggle each component off in turn; writes ablation.csv/json"},
    {"attack-inversion", "gradient inversion against full-precision and binarized updates"},
    {"attack-poison", "backdoor under mean versus median-style aggregation"},
    {"bench-compression", "payload bits per update for each configured dimension"},
    {"guard-score", "score claims from guard.input and emit pass/abstain decisions"},
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Secure binarized federated learning simulator"};
  app.require_subcommand(1);
  std::string config_path;
  std::string out_dir = "out";
  std::optional<std::uint64_t> seed;
  std::optional<std::string> mode;
  for (const auto& [name, help] : kCommands) {
    CLI::App* sub = app.add_subcommand(name, help);
    sub->add_option("--config", config_path, "JSON config file");
    sub->add_option("--out", out_dir, "artifact root directory")->capture_default_str();
    sub->add_option("--seed", seed, "override the config seed list with one seed");
    sub->add_option("--mode", mode,
                    "secure_majority | plaintext_median | mean | dp_mean | signsgd_majority");
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }

  std::string config_json = "{}";
  if (!config_path.empty()) {
    std::ifstream in(config_path);
    if (!in) {
      std::cerr << "error: cannot read config " << config_path << "\n";
      return kExitConfig;
    }
    std::stringstream ss;
    ss << in.rdbuf();
    config_json = ss.str();
  }

  const std::string command = app.get_subcommands().front()->get_name();
  int exit_code = kExitInternal;
  char* message = nullptr;
  const safefl_status st =
      safefl_run_command(command.c_str(), config_json.c_str(), out_dir.c_str(),
                         seed ? &*seed : nullptr, mode ? mode->c_str() : nullptr, &exit_code,
                         &message);
  if (st != SAFEFL_OK) {
    std::cerr << "error: " << safefl_last_error() << "\n";
    return st == SAFEFL_E_CONFIG || st == SAFEFL_E_ARGUMENT ? kExitConfig : kExitInternal;
  }
  if (message && *message) (exit_code == 0 ? std::cout : std::cerr) << message << "\n";
  safefl_string_free(message);
  return exit_code;
}
