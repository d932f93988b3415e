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

#ifndef SAFEFL_PAILLIER_HPP_
#define SAFEFL_PAILLIER_HPP_

#include <gmpxx.h>

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "safefl/common.hpp"

// Paillier cryptosystem with a half-range signed plaintext encoding.
//
// Plaintexts live in Z_n. A signed value v with |v| <= (n-1)/2 is encoded as
// v for v >= 0 and n + v for v < 0, so sums of +-1 client updates decode with
// their sign intact as long as n > 2K.
//
// Arithmetic is not constant time. This is a simulator, not a production
// cryptographic library.
namespace safefl::paillier {

struct PublicKey {
  mpz_class n;
  mpz_class g;
  mpz_class n_squared;
  unsigned bits = 0;
};

struct SecretKey {
  mpz_class lambda;
  mpz_class mu;
};

struct Keypair {
  PublicKey pk;
  SecretKey sk;
  // Factors are kept in memory for tests and never serialized.
  mpz_class p;
  mpz_class q;
};

struct Ciphertext {
  mpz_class value;
  bool operator==(const Ciphertext& o) const { return value == o.value; }
};

struct SignedPlain {
  mpz_class value;
  SignedPlain() = default;
  explicit SignedPlain(long v) : value(v) {}
  explicit SignedPlain(mpz_class v) : value(std::move(v)) {}
  long ToLong() const;
  bool operator==(const SignedPlain& o) const { return value == o.value; }
};

// Key sizes accepted by Keygen.
bool IsSupportedKeySize(unsigned bits);

// Generates p, q as distinct bits/2-bit probable primes (Miller-Rabin, 40
// rounds) from a seeded generator; n = p*q has exactly `bits` bits and
// g = n + 1. Throws Error(kKeyGeneration) if the bounded prime search fails.
Keypair Keygen(unsigned bits, std::uint64_t seed);

// Builds a keypair from caller-supplied primes with g = n + 1. Intended for
// toy keys such as p=5, q=7.
Keypair KeypairFromPrimes(const mpz_class& p, const mpz_class& q);

// As above with an explicit generator g. Requires gcd(L(g^lambda mod n^2), n)
// = 1 so that mu exists.
Keypair KeypairFromPrimes(const mpz_class& p, const mpz_class& q,
                          const mpz_class& g);

bool IsProbablePrime(const mpz_class& candidate, int rounds, Rng& rng);

// Largest magnitude representable by the signed encoding, (n-1)/2.
mpz_class MaxSignedMagnitude(const PublicKey& pk);
mpz_class EncodeSigned(const PublicKey& pk, const SignedPlain& m);
SignedPlain DecodeSigned(const PublicKey& pk, const mpz_class& m);

// c = g^enc(m) * r^n mod n^2 with r drawn uniformly from Z_n^* using `seed`.
// Uses (1 + enc(m) n) in place of g^enc(m) when g = n + 1.
Ciphertext Encrypt(const PublicKey& pk, const SignedPlain& m,
                   std::uint64_t seed);

// Explicit-randomness variants. `r` must be a unit modulo n.
Ciphertext EncryptWithNonce(const PublicKey& pk, const SignedPlain& m,
                            const mpz_class& r);
// Always computes g^enc(m) by modular exponentiation.
Ciphertext EncryptGenericWithNonce(const PublicKey& pk, const SignedPlain& m,
                                   const mpz_class& r);

// Throws Error(kCiphertext) when c is outside [0, n^2) or not a unit.
SignedPlain Decrypt(const SecretKey& sk, const PublicKey& pk,
                    const Ciphertext& c);

// Product of ciphertexts mod n^2; decrypts to the plaintext sum.
Ciphertext HomSum(const PublicKey& pk, std::span<const Ciphertext> cts);

// Key and ciphertext text forms: lowercase hex big integers.
std::string KeypairToJson(const Keypair& kp);
std::string PublicKeyToJson(const PublicKey& pk);
Keypair KeypairFromJson(const std::string& text);
std::string CiphertextsToJson(std::span<const Ciphertext> cts);
std::vector<Ciphertext> CiphertextsFromJson(const std::string& text);

}  // namespace safefl::paillier

#endif  // SAFEFL_PAILLIER_HPP_
