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

#ifndef SAFEFL_SAFEFL_H_
#define SAFEFL_SAFEFL_H_

#include <stddef.h>
#include <stdint.h>

#if defined(SAFEFL_BUILDING_LIBRARY)
#define SAFEFL_API __attribute__((visibility("default")))
#else
#define SAFEFL_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

/* Status codes returned by every fallible call. */
typedef enum safefl_status {
  SAFEFL_OK = 0,
  SAFEFL_E_ARGUMENT = 1,
  SAFEFL_E_CONFIG = 2,
  SAFEFL_E_DIVERGENCE = 3,
  SAFEFL_E_INTERNAL = 4,
  SAFEFL_E_RANGE = 5,
  SAFEFL_E_CIPHERTEXT = 6,
  SAFEFL_E_PROTOCOL = 7,
  SAFEFL_E_INTEGRITY = 8,
  SAFEFL_E_KEYGEN = 9,
  SAFEFL_E_IO = 10
} safefl_status;

typedef struct safefl_keypair safefl_keypair;
typedef struct safefl_ciphertexts safefl_ciphertexts;

SAFEFL_API const char* safefl_version(void);

/* Message for the last failing call on this thread, or "" if none. */
SAFEFL_API const char* safefl_last_error(void);

/* Strings returned through char** out-parameters are owned by the caller. */
SAFEFL_API void safefl_string_free(char* s);

/* Paillier keys. bits is one of 256, 512, 1024, 2048. */
SAFEFL_API safefl_status safefl_keypair_generate(unsigned bits, uint64_t seed,
                                                 safefl_keypair** out);
SAFEFL_API safefl_status safefl_keypair_from_json(const char* json, safefl_keypair** out);
SAFEFL_API safefl_status safefl_keypair_to_json(const safefl_keypair* kp, char** out);
SAFEFL_API safefl_status safefl_public_key_to_json(const safefl_keypair* kp, char** out);
SAFEFL_API unsigned safefl_keypair_bits(const safefl_keypair* kp);
SAFEFL_API void safefl_keypair_free(safefl_keypair* kp);

/* Encrypts n signed integers; nonces derive from seed and the index. */
SAFEFL_API safefl_status safefl_encrypt(const safefl_keypair* kp, const int64_t* values,
                                        size_t n, uint64_t seed, safefl_ciphertexts** out);
/* Coordinate-wise homomorphic sum of k equal-length batches. */
SAFEFL_API safefl_status safefl_hom_sum(const safefl_keypair* kp,
                                        const safefl_ciphertexts* const* batches, size_t k,
                                        safefl_ciphertexts** out);
/* Decrypts into out[0..n); n must equal the batch length. */
SAFEFL_API safefl_status safefl_decrypt(const safefl_keypair* kp,
                                        const safefl_ciphertexts* cts, int64_t* out, size_t n);
SAFEFL_API size_t safefl_ciphertexts_size(const safefl_ciphertexts* cts);
SAFEFL_API safefl_status safefl_ciphertexts_to_json(const safefl_ciphertexts* cts, char** out);
SAFEFL_API void safefl_ciphertexts_free(safefl_ciphertexts* cts);

/* Binarizes delta[0..n) into signs_out[0..n) (+1/-1). variant is
 * "abs-median", "signed-median" or "zero"; threshold_out may be NULL. */
SAFEFL_API safefl_status safefl_smartify(const double* delta, size_t n, const char* variant,
                                         int8_t* signs_out, double* threshold_out);

/* scheme is "full32", "binarized" or "ciphertext" (key_bits used only for
 * the latter). */
SAFEFL_API safefl_status safefl_payload_bits(uint64_t d, const char* scheme,
                                             unsigned key_bits, uint64_t* out);

SAFEFL_API safefl_status safefl_faith_score(const double* nli_scores, size_t m,
                                            double confidence, double* out);
/* *pass_out is 1 for pass, 0 for abstain-or-regenerate. */
SAFEFL_API safefl_status safefl_guard_decide(double score, double tau, int* pass_out);

/* Runs a CLI subcommand. seed and mode may be NULL. *exit_code receives the
 * process exit code (0, 2, 3, 4); *message (may be NULL) receives a
 * diagnostic string. */
SAFEFL_API safefl_status safefl_run_command(const char* subcommand, const char* config_json,
                                            const char* out_dir, const uint64_t* seed,
                                            const char* mode, int* exit_code, char** message);

#ifdef __cplusplus
}
#endif

#endif /* SAFEFL_SAFEFL_H_ */
