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

#include "safefl/paillier.hpp"

#include <array>
#include <climits>

#include "json.hpp"

namespace safefl::paillier {
namespace {

constexpr int kMillerRabinRounds = 40;
constexpr int kMaxPrimeCandidates = 200000;

constexpr std::array<unsigned, 24> kSmallPrimes = {
    3,  5,  7,  11, 13, 17, 19, 23, 29, 31, 37, 41,
    43, 47, 53, 59, 61, 67, 71, 73, 79, 83, 89, 97};

// Uniform integer with exactly `bits` random bits (may have leading zeros).
mpz_class RandomBits(unsigned bits, Rng& rng) {
  const std::size_t words = (bits + 63) / 64;
  std::vector<std::uint64_t> buf(words);
  for (auto& w : buf) w = rng();
  if (bits % 64 != 0) buf.back() &= (~0ULL) >> (64 - bits % 64);
  mpz_class out;
  mpz_import(out.get_mpz_t(), words, -1, sizeof(std::uint64_t), 0, 0,
             buf.data());
  return out;
}

// Uniform integer in [0, bound) by rejection sampling.
mpz_class RandomBelow(const mpz_class& bound, Rng& rng) {
  const unsigned bits = mpz_sizeinbase(bound.get_mpz_t(), 2);
  while (true) {
    mpz_class x = RandomBits(bits, rng);
    if (x < bound) return x;
  }
}

mpz_class RandomUnit(const mpz_class& n, Rng& rng) {
  while (true) {
    mpz_class r = RandomBelow(n, rng);
    if (r == 0) continue;
    mpz_class g;
    mpz_gcd(g.get_mpz_t(), r.get_mpz_t(), n.get_mpz_t());
    if (g == 1) return r;
  }
}

mpz_class PowMod(const mpz_class& b, const mpz_class& e, const mpz_class& m) {
  mpz_class out;
  mpz_powm(out.get_mpz_t(), b.get_mpz_t(), e.get_mpz_t(), m.get_mpz_t());
  return out;
}

mpz_class L(const mpz_class& x, const mpz_class& n) { return (x - 1) / n; }

mpz_class RandomPrime(unsigned bits, Rng& rng) {
  for (int attempt = 0; attempt < kMaxPrimeCandidates; ++attempt) {
    mpz_class c = RandomBits(bits, rng);
    // Top two bits set so the product of two such primes has 2*bits bits.
    mpz_setbit(c.get_mpz_t(), bits - 1);
    mpz_setbit(c.get_mpz_t(), bits - 2);
    mpz_setbit(c.get_mpz_t(), 0);
    if (IsProbablePrime(c, kMillerRabinRounds, rng)) return c;
  }
  throw Error(ErrorCode::kKeyGeneration,
              "prime search exhausted " + std::to_string(kMaxPrimeCandidates) +
                  " candidates");
}

std::string ToHex(const mpz_class& x) { return x.get_str(16); }

mpz_class FromText(const nlohmann::json& j, const char* field) {
  if (!j.contains(field)) {
    throw Error(ErrorCode::kConfig, std::string("key json: missing ") + field);
  }
  std::string s;
  int base = 16;
  if (j[field].is_string()) {
    s = j[field].get<std::string>();
    if (s.rfind("0x", 0) == 0) {
      s = s.substr(2);
    } else if (s.rfind("dec:", 0) == 0) {
      s = s.substr(4);
      base = 10;
    }
  } else if (j[field].is_number_unsigned()) {
    return mpz_class(std::to_string(j[field].get<std::uint64_t>()), 10);
  } else {
    throw Error(ErrorCode::kConfig,
                std::string("key json: field not a string: ") + field);
  }
  mpz_class out;
  if (mpz_set_str(out.get_mpz_t(), s.c_str(), base) != 0) {
    throw Error(ErrorCode::kConfig,
                std::string("key json: bad integer in ") + field);
  }
  return out;
}

}  // namespace

long SignedPlain::ToLong() const {
  if (!value.fits_slong_p()) throw Error(ErrorCode::kRange, "plaintext exceeds long");
  return value.get_si();
}

bool IsSupportedKeySize(unsigned bits) {
  return bits == 256 || bits == 512 || bits == 1024 || bits == 2048;
}

bool IsProbablePrime(const mpz_class& n, int rounds, Rng& rng) {
  if (n < 2) return false;
  if (n < 4) return true;
  if (mpz_even_p(n.get_mpz_t())) return false;
  for (unsigned sp : kSmallPrimes) {
    if (n == sp) return true;
    if (mpz_divisible_ui_p(n.get_mpz_t(), sp)) return false;
  }
  // n - 1 = d * 2^s with d odd.
  const mpz_class n_minus_1 = n - 1;
  mpz_class d = n_minus_1;
  unsigned s = 0;
  while (mpz_even_p(d.get_mpz_t())) {
    d >>= 1;
    ++s;
  }
  const mpz_class span = n - 3;
  for (int i = 0; i < rounds; ++i) {
    const mpz_class a = RandomBelow(span, rng) + 2;  // [2, n-2]
    mpz_class x = PowMod(a, d, n);
    if (x == 1 || x == n_minus_1) continue;
    bool witness = true;
    for (unsigned k = 1; k < s; ++k) {
      x = x * x % n;
      if (x == n_minus_1) {
        witness = false;
        break;
      }
    }
    if (witness) return false;
  }
  return true;
}

Keypair KeypairFromPrimes(const mpz_class& p, const mpz_class& q) {
  return KeypairFromPrimes(p, q, p * q + 1);
}

Keypair KeypairFromPrimes(const mpz_class& p, const mpz_class& q,
                          const mpz_class& g) {
  if (p == q) throw ArgumentError("paillier: primes must be distinct");
  if (p < 2 || q < 2) throw ArgumentError("paillier: primes must be >= 2");
  Keypair kp;
  kp.p = p;
  kp.q = q;
  kp.pk.n = p * q;
  kp.pk.n_squared = kp.pk.n * kp.pk.n;
  kp.pk.g = g;
  kp.pk.bits = mpz_sizeinbase(kp.pk.n.get_mpz_t(), 2);
  mpz_class gcd;
  mpz_gcd(gcd.get_mpz_t(), g.get_mpz_t(), kp.pk.n_squared.get_mpz_t());
  if (gcd != 1) throw ArgumentError("paillier: g is not a unit mod n^2");
  mpz_lcm(kp.sk.lambda.get_mpz_t(), mpz_class(p - 1).get_mpz_t(),
          mpz_class(q - 1).get_mpz_t());
  const mpz_class u = L(PowMod(g, kp.sk.lambda, kp.pk.n_squared), kp.pk.n);
  if (mpz_invert(kp.sk.mu.get_mpz_t(), u.get_mpz_t(), kp.pk.n.get_mpz_t()) ==
      0) {
    throw ArgumentError("paillier: L(g^lambda) not invertible mod n");
  }
  return kp;
}

Keypair Keygen(unsigned bits, std::uint64_t seed) {
  if (!IsSupportedKeySize(bits)) {
    throw ArgumentError("paillier: unsupported key size " +
                        std::to_string(bits));
  }
  Rng rng(seed);
  const unsigned half = bits / 2;
  mpz_class p = RandomPrime(half, rng);
  mpz_class q;
  do {
    q = RandomPrime(half, rng);
  } while (q == p);
  Keypair kp = KeypairFromPrimes(p, q);
  if (kp.pk.bits != bits) {
    throw Error(ErrorCode::kKeyGeneration, "paillier: modulus size mismatch");
  }
  return kp;
}

mpz_class MaxSignedMagnitude(const PublicKey& pk) { return (pk.n - 1) / 2; }

mpz_class EncodeSigned(const PublicKey& pk, const SignedPlain& m) {
  if (abs(m.value) > MaxSignedMagnitude(pk)) {
    throw Error(ErrorCode::kRange, "paillier: plaintext " + m.value.get_str() +
                                       " outside signed range");
  }
  return m.value < 0 ? mpz_class(pk.n + m.value) : m.value;
}

SignedPlain DecodeSigned(const PublicKey& pk, const mpz_class& m) {
  if (m < 0 || m >= pk.n) throw Error(ErrorCode::kRange, "paillier: not in Z_n");
  if (m > MaxSignedMagnitude(pk)) return SignedPlain(mpz_class(m - pk.n));
  return SignedPlain(m);
}

Ciphertext EncryptWithNonce(const PublicKey& pk, const SignedPlain& m,
                            const mpz_class& r) {
  if (pk.g != pk.n + 1) return EncryptGenericWithNonce(pk, m, r);
  const mpz_class enc = EncodeSigned(pk, m);
  const mpz_class gm = (1 + enc * pk.n) % pk.n_squared;
  return Ciphertext{gm * PowMod(r, pk.n, pk.n_squared) % pk.n_squared};
}

Ciphertext EncryptGenericWithNonce(const PublicKey& pk, const SignedPlain& m,
                                   const mpz_class& r) {
  const mpz_class enc = EncodeSigned(pk, m);
  return Ciphertext{PowMod(pk.g, enc, pk.n_squared) *
                    PowMod(r, pk.n, pk.n_squared) % pk.n_squared};
}

Ciphertext Encrypt(const PublicKey& pk, const SignedPlain& m,
                   std::uint64_t seed) {
  Rng rng(seed);
  return EncryptWithNonce(pk, m, RandomUnit(pk.n, rng));
}

SignedPlain Decrypt(const SecretKey& sk, const PublicKey& pk,
                    const Ciphertext& c) {
  if (c.value <= 0 || c.value >= pk.n_squared) {
    throw Error(ErrorCode::kCiphertext, "paillier: ciphertext out of range");
  }
  mpz_class gcd;
  mpz_gcd(gcd.get_mpz_t(), c.value.get_mpz_t(), pk.n.get_mpz_t());
  if (gcd != 1) {
    throw Error(ErrorCode::kCiphertext,
                "paillier: ciphertext is not a unit mod n^2");
  }
  const mpz_class m =
      L(PowMod(c.value, sk.lambda, pk.n_squared), pk.n) * sk.mu % pk.n;
  return DecodeSigned(pk, m);
}

Ciphertext HomSum(const PublicKey& pk, std::span<const Ciphertext> cts) {
  if (cts.empty()) throw ArgumentError("paillier: hom_sum of empty list");
  mpz_class acc = cts.front().value;
  for (std::size_t i = 1; i < cts.size(); ++i) {
    acc = acc * cts[i].value % pk.n_squared;
  }
  return Ciphertext{acc};
}

std::string PublicKeyToJson(const PublicKey& pk) {
  nlohmann::json j;
  j["bits"] = pk.bits;
  j["n"] = ToHex(pk.n);
  j["g"] = ToHex(pk.g);
  return j.dump(2);
}

std::string KeypairToJson(const Keypair& kp) {
  nlohmann::ordered_json j;
  j["bits"] = kp.pk.bits;
  j["n"] = ToHex(kp.pk.n);
  j["g"] = ToHex(kp.pk.g);
  j["lambda"] = ToHex(kp.sk.lambda);
  j["mu"] = ToHex(kp.sk.mu);
  return j.dump(2);
}

Keypair KeypairFromJson(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kConfig, std::string("key json: ") + e.what());
  }
  Keypair kp;
  kp.pk.n = FromText(j, "n");
  kp.pk.g = FromText(j, "g");
  kp.pk.n_squared = kp.pk.n * kp.pk.n;
  kp.pk.bits = mpz_sizeinbase(kp.pk.n.get_mpz_t(), 2);
  if (j.contains("bits") && j["bits"].get<unsigned>() != kp.pk.bits) {
    throw Error(ErrorCode::kConfig, "key json: bits does not match n");
  }
  if (j.contains("lambda")) kp.sk.lambda = FromText(j, "lambda");
  if (j.contains("mu")) kp.sk.mu = FromText(j, "mu");
  return kp;
}

std::string CiphertextsToJson(std::span<const Ciphertext> cts) {
  nlohmann::json j = nlohmann::json::array();
  for (const auto& c : cts) j.push_back(ToHex(c.value));
  return j.dump();
}

std::vector<Ciphertext> CiphertextsFromJson(const std::string& text) {
  std::vector<Ciphertext> out;
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kConfig, std::string("ciphertext json: ") + e.what());
  }
  if (!j.is_array()) throw Error(ErrorCode::kConfig, "ciphertext json: not an array");
  for (const auto& e : j) {
    mpz_class v;
    if (!e.is_string() ||
        mpz_set_str(v.get_mpz_t(), e.get<std::string>().c_str(), 16) != 0) {
      throw Error(ErrorCode::kConfig, "ciphertext json: bad hex entry");
    }
    out.push_back(Ciphertext{v});
  }
  return out;
}

}  // namespace safefl::paillier
