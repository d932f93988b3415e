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

#include <gtest/gtest.h>

#include <cstdint>
#include <random>

namespace safefl::paillier {
namespace {

// Independent textbook Paillier over machine integers for tiny moduli.
struct TinyOracle {
  std::uint64_t p, q, n, n2, lambda, mu, g;

  static std::uint64_t PowMod(std::uint64_t b, std::uint64_t e, std::uint64_t m) {
    unsigned __int128 r = 1, x = b % m;
    while (e) {
      if (e & 1) r = r * x % m;
      x = x * x % m;
      e >>= 1;
    }
    return static_cast<std::uint64_t>(r);
  }
  static std::uint64_t Gcd(std::uint64_t a, std::uint64_t b) {
    while (b) {
      const auto t = a % b;
      a = b;
      b = t;
    }
    return a;
  }
  static std::uint64_t InvMod(std::uint64_t a, std::uint64_t m) {
    for (std::uint64_t x = 1; x < m; ++x) {
      if (a * x % m == 1) return x;
    }
    return 0;
  }

  TinyOracle(std::uint64_t p_, std::uint64_t q_) : p(p_), q(q_) {
    n = p * q;
    n2 = n * n;
    g = n + 1;
    lambda = (p - 1) * (q - 1) / Gcd(p - 1, q - 1);
    mu = InvMod((PowMod(g, lambda, n2) - 1) / n, n);
  }
  std::uint64_t Encrypt(std::uint64_t m, std::uint64_t r) const {
    return static_cast<std::uint64_t>(
        static_cast<unsigned __int128>(PowMod(g, m, n2)) * PowMod(r, n, n2) % n2);
  }
  std::uint64_t Decrypt(std::uint64_t c) const {
    return (PowMod(c, lambda, n2) - 1) / n * mu % n;
  }
};

TEST(PaillierTest, ToyKeyMatchesTextbookOracle) {
  const TinyOracle oracle(5, 7);
  const Keypair kp = KeypairFromPrimes(5, 7);
  EXPECT_EQ(kp.pk.n, 35);
  EXPECT_EQ(kp.sk.lambda, oracle.lambda);
  EXPECT_EQ(kp.sk.mu, oracle.mu);
  for (std::uint64_t m = 0; m < oracle.n; ++m) {
    for (std::uint64_t r = 1; r < oracle.n; ++r) {
      if (TinyOracle::Gcd(r, oracle.n) != 1) continue;
      const Ciphertext c = EncryptWithNonce(kp.pk, DecodeSigned(kp.pk, m), r);
      ASSERT_EQ(c.value, oracle.Encrypt(m, r)) << "m=" << m << " r=" << r;
      ASSERT_EQ(oracle.Decrypt(c.value.get_ui()), m);
    }
  }
}

TEST(PaillierTest, FastPathEqualsGenericExponentiation) {
  const Keypair kp = KeypairFromPrimes(1009, 1013);
  for (long m : {-5L, -1L, 0L, 1L, 7L, 123456L}) {
    const SignedPlain v(m);
    EXPECT_EQ(EncryptWithNonce(kp.pk, v, 12345), EncryptGenericWithNonce(kp.pk, v, 12345));
  }
}

TEST(PaillierTest, SignedEncodingRoundTrip) {
  const Keypair kp = KeypairFromPrimes(5, 7);
  const long half = MaxSignedMagnitude(kp.pk).get_si();
  EXPECT_EQ(half, 17);
  for (long v = -half; v <= half; ++v) {
    EXPECT_EQ(DecodeSigned(kp.pk, EncodeSigned(kp.pk, SignedPlain(v))).ToLong(), v);
  }
  EXPECT_THROW(EncodeSigned(kp.pk, SignedPlain(half + 1)), Error);
  EXPECT_THROW(EncodeSigned(kp.pk, SignedPlain(-half - 1)), Error);
}

TEST(PaillierTest, GeneratedKeyHasRequestedSize) {
  for (unsigned bits : {256u, 512u}) {
    const Keypair kp = Keygen(bits, 99);
    EXPECT_EQ(mpz_sizeinbase(kp.pk.n.get_mpz_t(), 2), bits);
    EXPECT_EQ(kp.p * kp.q, kp.pk.n);
    EXPECT_EQ(kp.pk.g, kp.pk.n + 1);
    EXPECT_EQ(kp.pk.n_squared, kp.pk.n * kp.pk.n);
  }
}

TEST(PaillierTest, KeygenIsDeterministicPerSeed) {
  EXPECT_EQ(Keygen(256, 5).pk.n, Keygen(256, 5).pk.n);
  EXPECT_NE(Keygen(256, 5).pk.n, Keygen(256, 6).pk.n);
}

TEST(PaillierTest, UnsupportedKeySizeRejected) {
  EXPECT_FALSE(IsSupportedKeySize(128));
  EXPECT_FALSE(IsSupportedKeySize(3072));
  EXPECT_THROW(Keygen(100, 1), Error);
}

TEST(PaillierTest, HomomorphicSumDecryptsToPlainSum) {
  const Keypair kp = Keygen(512, 11);
  std::mt19937_64 rng(3);
  std::uniform_int_distribution<long> val(-1000000, 1000000);
  for (int t = 0; t < 50; ++t) {
    std::vector<Ciphertext> cts;
    long sum = 0;
    for (int i = 0; i < 8; ++i) {
      const long v = val(rng);
      sum += v;
      cts.push_back(Encrypt(kp.pk, SignedPlain(v), rng()));
    }
    EXPECT_EQ(Decrypt(kp.sk, kp.pk, HomSum(kp.pk, cts)).ToLong(), sum);
  }
}

TEST(PaillierTest, EncryptionIsRandomized) {
  const Keypair kp = Keygen(256, 2);
  const auto a = Encrypt(kp.pk, SignedPlain(1L), 1);
  const auto b = Encrypt(kp.pk, SignedPlain(1L), 2);
  EXPECT_NE(a, b);
  EXPECT_EQ(Decrypt(kp.sk, kp.pk, a), Decrypt(kp.sk, kp.pk, b));
}

TEST(PaillierTest, MalformedCiphertextRejected) {
  const Keypair kp = KeypairFromPrimes(5, 7);
  try {
    Decrypt(kp.sk, kp.pk, Ciphertext{kp.pk.n_squared});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kCiphertext);
  }
  EXPECT_THROW(Decrypt(kp.sk, kp.pk, Ciphertext{-1}), Error);
  EXPECT_THROW(Decrypt(kp.sk, kp.pk, Ciphertext{5}), Error);  // shares a factor with n
}

TEST(PaillierTest, EmptyHomSumRejected) {
  const Keypair kp = KeypairFromPrimes(5, 7);
  EXPECT_THROW(HomSum(kp.pk, {}), Error);
}

TEST(PaillierTest, PrimalityAgreesWithTrialDivision) {
  Rng rng(1);
  for (long v = 2; v < 3000; ++v) {
    bool prime = true;
    for (long d = 2; d * d <= v; ++d) {
      if (v % d == 0) {
        prime = false;
        break;
      }
    }
    EXPECT_EQ(IsProbablePrime(mpz_class(v), 40, rng), prime) << v;
  }
  EXPECT_FALSE(IsProbablePrime(mpz_class(561), 40, rng));  // Carmichael
}

TEST(PaillierTest, JsonRoundTripPreservesKey) {
  const Keypair kp = Keygen(256, 8);
  const Keypair back = KeypairFromJson(KeypairToJson(kp));
  EXPECT_EQ(back.pk.n, kp.pk.n);
  EXPECT_EQ(back.sk.lambda, kp.sk.lambda);
  EXPECT_EQ(back.sk.mu, kp.sk.mu);
  const auto c = Encrypt(kp.pk, SignedPlain(-42L), 9);
  EXPECT_EQ(Decrypt(back.sk, back.pk, c).ToLong(), -42);
}

TEST(PaillierTest, CiphertextJsonRoundTrip) {
  const Keypair kp = Keygen(256, 8);
  std::vector<Ciphertext> cts = {Encrypt(kp.pk, SignedPlain(1L), 1),
                                 Encrypt(kp.pk, SignedPlain(-1L), 2)};
  EXPECT_EQ(CiphertextsFromJson(CiphertextsToJson(cts)), cts);
  EXPECT_THROW(CiphertextsFromJson("[\"zz\"]"), Error);
  EXPECT_THROW(KeypairFromJson("{}"), Error);
}

}  // namespace
}  // namespace safefl::paillier
