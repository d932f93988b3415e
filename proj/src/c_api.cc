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

#include "safefl/safefl.h"

#include <algorithm>
#include <cstdlib>
#include <cstring>
#include <memory>
#include <string>
#include <vector>

#include "safefl/experiment.hpp"
#include "safefl/guard.hpp"
#include "safefl/paillier.hpp"
#include "safefl/quantizer.hpp"

struct safefl_keypair {
  safefl::paillier::Keypair kp;
};

struct safefl_ciphertexts {
  std::vector<safefl::paillier::Ciphertext> cts;
};

namespace {

thread_local std::string g_last_error;

safefl_status Fail(safefl_status s, const std::string& msg) {
  g_last_error = msg;
  return s;
}

template <typename Fn>
safefl_status Guarded(Fn fn) {
  try {
    fn();
    g_last_error.clear();
    return SAFEFL_OK;
  } catch (const safefl::Error& e) {
    return Fail(static_cast<safefl_status>(e.code()), e.what());
  } catch (const std::bad_alloc&) {
    return Fail(SAFEFL_E_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return Fail(SAFEFL_E_INTERNAL, e.what());
  }
}

char* Dup(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

void Require(bool ok, const char* what) {
  if (!ok) throw safefl::ArgumentError(what);
}

}  // namespace

extern "C" {

const char* safefl_version(void) { return "0.1.0"; }

const char* safefl_last_error(void) { return g_last_error.c_str(); }

void safefl_string_free(char* s) { std::free(s); }

safefl_status safefl_keypair_generate(unsigned bits, uint64_t seed, safefl_keypair** out) {
  return Guarded([&] {
    Require(out != nullptr, "keypair_generate: null output");
    *out = nullptr;
    if (!safefl::paillier::IsSupportedKeySize(bits)) {
      throw safefl::Error(safefl::ErrorCode::kConfig, "unsupported key size");
    }
    *out = new safefl_keypair{safefl::paillier::Keygen(bits, seed)};
  });
}

safefl_status safefl_keypair_from_json(const char* json, safefl_keypair** out) {
  return Guarded([&] {
    Require(json && out, "keypair_from_json: null argument");
    *out = nullptr;
    *out = new safefl_keypair{safefl::paillier::KeypairFromJson(json)};
  });
}

safefl_status safefl_keypair_to_json(const safefl_keypair* kp, char** out) {
  return Guarded([&] {
    Require(kp && out, "keypair_to_json: null argument");
    *out = Dup(safefl::paillier::KeypairToJson(kp->kp));
  });
}

safefl_status safefl_public_key_to_json(const safefl_keypair* kp, char** out) {
  return Guarded([&] {
    Require(kp && out, "public_key_to_json: null argument");
    *out = Dup(safefl::paillier::PublicKeyToJson(kp->kp.pk));
  });
}

unsigned safefl_keypair_bits(const safefl_keypair* kp) { return kp ? kp->kp.pk.bits : 0; }

void safefl_keypair_free(safefl_keypair* kp) { delete kp; }

safefl_status safefl_encrypt(const safefl_keypair* kp, const int64_t* values, size_t n,
                             uint64_t seed, safefl_ciphertexts** out) {
  return Guarded([&] {
    Require(kp && out && (values || n == 0), "encrypt: null argument");
    *out = nullptr;
    auto batch = std::make_unique<safefl_ciphertexts>();
    batch->cts.reserve(n);
    for (size_t j = 0; j < n; ++j) {
      batch->cts.push_back(safefl::paillier::Encrypt(
          kp->kp.pk, safefl::paillier::SignedPlain(static_cast<long>(values[j])),
          safefl::DeriveSeed(seed, j)));
    }
    *out = batch.release();
  });
}

safefl_status safefl_hom_sum(const safefl_keypair* kp, const safefl_ciphertexts* const* batches,
                             size_t k, safefl_ciphertexts** out) {
  return Guarded([&] {
    Require(kp && batches && out, "hom_sum: null argument");
    Require(k > 0, "hom_sum: no batches");
    *out = nullptr;
    for (size_t i = 0; i < k; ++i) Require(batches[i] != nullptr, "hom_sum: null batch");
    const size_t d = batches[0]->cts.size();
    for (size_t i = 1; i < k; ++i) {
      if (batches[i]->cts.size() != d) {
        throw safefl::Error(safefl::ErrorCode::kProtocol, "hom_sum: batch length mismatch");
      }
    }
    auto sum = std::make_unique<safefl_ciphertexts>();
    std::vector<safefl::paillier::Ciphertext> column(k);
    for (size_t j = 0; j < d; ++j) {
      for (size_t i = 0; i < k; ++i) column[i] = batches[i]->cts[j];
      sum->cts.push_back(safefl::paillier::HomSum(kp->kp.pk, column));
    }
    *out = sum.release();
  });
}

safefl_status safefl_decrypt(const safefl_keypair* kp, const safefl_ciphertexts* cts,
                             int64_t* out, size_t n) {
  return Guarded([&] {
    Require(kp && cts && (out || n == 0), "decrypt: null argument");
    Require(n == cts->cts.size(), "decrypt: output length mismatch");
    for (size_t j = 0; j < n; ++j) {
      out[j] = safefl::paillier::Decrypt(kp->kp.sk, kp->kp.pk, cts->cts[j]).ToLong();
    }
  });
}

size_t safefl_ciphertexts_size(const safefl_ciphertexts* cts) {
  return cts ? cts->cts.size() : 0;
}

safefl_status safefl_ciphertexts_to_json(const safefl_ciphertexts* cts, char** out) {
  return Guarded([&] {
    Require(cts && out, "ciphertexts_to_json: null argument");
    *out = Dup(safefl::paillier::CiphertextsToJson(cts->cts));
  });
}

void safefl_ciphertexts_free(safefl_ciphertexts* cts) { delete cts; }

safefl_status safefl_smartify(const double* delta, size_t n, const char* variant,
                              int8_t* signs_out, double* threshold_out) {
  return Guarded([&] {
    Require(delta && variant && signs_out, "smartify: null argument");
    const safefl::ParameterVector v(std::vector<double>(delta, delta + n));
    const auto bin = safefl::quantizer::Smartify(v, safefl::quantizer::ParseVariant(variant));
    std::copy(bin.signs.begin(), bin.signs.end(), signs_out);
    if (threshold_out) *threshold_out = bin.threshold;
  });
}

safefl_status safefl_payload_bits(uint64_t d, const char* scheme, unsigned key_bits,
                                  uint64_t* out) {
  return Guarded([&] {
    Require(scheme && out, "payload_bits: null argument");
    using safefl::quantizer::PayloadScheme;
    const std::string s(scheme);
    PayloadScheme ps;
    if (s == "full32") {
      ps = PayloadScheme::kFull32;
    } else if (s == "binarized") {
      ps = PayloadScheme::kBinarized;
    } else if (s == "ciphertext") {
      ps = PayloadScheme::kCiphertext;
    } else {
      throw safefl::ArgumentError("payload_bits: unknown scheme " + s);
    }
    *out = safefl::quantizer::PayloadBits(d, ps, key_bits);
  });
}

safefl_status safefl_faith_score(const double* nli_scores, size_t m, double confidence,
                                 double* out) {
  return Guarded([&] {
    Require(out && (nli_scores || m == 0), "faith_score: null argument");
    safefl::guard::ClaimEvidence ce;
    ce.nli_scores.assign(nli_scores, nli_scores + m);
    ce.confidence = confidence;
    *out = safefl::guard::FaithScore(ce);
  });
}

safefl_status safefl_guard_decide(double score, double tau, int* pass_out) {
  return Guarded([&] {
    Require(pass_out != nullptr, "guard_decide: null output");
    *pass_out =
        safefl::guard::GuardDecision(score, tau) == safefl::guard::Decision::kPass ? 1 : 0;
  });
}

safefl_status safefl_run_command(const char* subcommand, const char* config_json,
                                 const char* out_dir, const uint64_t* seed, const char* mode,
                                 int* exit_code, char** message) {
  return Guarded([&] {
    Require(subcommand && out_dir && exit_code, "run_command: null argument");
    safefl::experiment::Overrides o;
    if (seed) o.seed = *seed;
    if (mode) o.mode = std::string(mode);
    const auto res = safefl::experiment::RunCommand(
        subcommand, config_json ? config_json : "{}", out_dir, o);
    *exit_code = static_cast<int>(res.code);
    if (message) {
      std::string text = res.message;
      for (const auto& a : res.artifacts) text += (text.empty() ? "" : "\n") + ("wrote " + a);
      *message = Dup(text);
    }
  });
}

}  // extern "C"
