#include <doctest.h>

#include <cmath>
#include <random>
#include <stdexcept>

#include "bitvoc/ecc.hpp"
#include "oracles.hpp"

using namespace bitvoc;

namespace {

// Frozen from exhaustive weight search over B_probe in 8..14.
constexpr std::size_t kFreeDistance = 10;

BitArray random_bits(std::size_t n, std::mt19937_64& rng) {
  std::bernoulli_distribution coin(0.5);
  BitArray b(n);
  for (auto& x : b) x = coin(rng);
  return b;
}

std::vector<double> random_probs(std::size_t n, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.01, 0.99);
  std::vector<double> q(n);
  for (auto& x : q) x = u(rng);
  return q;
}

// Recursively flips every subset of `positions` choose k and calls fn.
template <typename F>
void for_each_pattern(std::size_t n, std::size_t k, std::size_t start, BitArray& pattern, F&& fn) {
  if (k == 0) {
    fn(pattern);
    return;
  }
  for (std::size_t i = start; i + k <= n; ++i) {
    pattern[i] ^= 1U;
    for_each_pattern(n, k - 1, i + 1, pattern, fn);
    pattern[i] ^= 1U;
  }
}

}  // namespace

TEST_CASE("zero input encodes to zero") {
  auto c = ecc::encode(BitArray(16, 0));
  CHECK(c.size() == 44);
  CHECK(hamming_weight(c) == 0);
}

TEST_CASE("impulse response") {
  const BitArray expected{1, 1, 1, 0, 1, 1, 1, 1, 0, 0, 0, 1, 1, 1};
  CHECK(ecc::encode(BitArray{1}) == expected);
  CHECK(oracle::conv_encode({1}) == expected);
  CHECK(hamming_weight(expected) == 10);
}

TEST_CASE("coded lengths") {
  CHECK(ecc::encode(BitArray(15, 1)).size() == 42);
  CHECK(ecc::encode(BitArray(16, 1)).size() == 44);
  CHECK(ecc::coded_length(15) == 42);
  CHECK(ecc::coded_length(16) == 44);
  for (std::size_t B = 1; B <= 200; ++B) {
    CHECK(ecc::coded_length(B) == 2 * (B + 6));
    CHECK(static_cast<double>(ecc::coded_length(B)) / B <= 14.0);
  }
  CHECK(static_cast<double>(ecc::coded_length(100000)) / 100000 < 2.001);
  CHECK_THROWS_AS(ecc::encode(BitArray{}), std::invalid_argument);
}

TEST_CASE("encoder agrees with the shift-register reference") {
  std::mt19937_64 rng(11);
  for (int i = 0; i < 500; ++i) {
    auto b = random_bits(1 + rng() % 40, rng);
    CHECK(ecc::encode(b) == oracle::conv_encode(b));
  }
}

TEST_CASE("encoder is linear over GF(2)") {
  std::mt19937_64 rng(12);
  for (int i = 0; i < 300; ++i) {
    const std::size_t n = 1 + rng() % 24;
    auto a = random_bits(n, rng);
    auto b = random_bits(n, rng);
    BitArray sum(n);
    for (std::size_t j = 0; j < n; ++j) sum[j] = a[j] ^ b[j];
    auto ca = ecc::encode(a), cb = ecc::encode(b), cs = ecc::encode(sum);
    for (std::size_t j = 0; j < cs.size(); ++j) CHECK(cs[j] == (ca[j] ^ cb[j]));
  }
}

TEST_CASE("tap_parity is the positional dot product") {
  CHECK(ecc::tap_parity(0b1000000, ecc::kTaps1) == 1);  // newest bit meets tap 6
  CHECK(ecc::tap_parity(0b0000010, ecc::kTaps1) == 0);  // tap 1 of g1 is 0
  CHECK(ecc::tap_parity(0b0000010, ecc::kTaps2) == 1);
  CHECK(ecc::tap_parity(0b1111111, ecc::kTaps1) == 1);  // five ones
  CHECK(ecc::tap_parity(0b1111111, ecc::kTaps2) == 1);
}

TEST_CASE("noiseless decoding returns the transmitted block") {
  std::mt19937_64 rng(13);
  for (int i = 0; i < 200; ++i) {
    auto b = random_bits(15, rng);
    CHECK(ecc::viterbi_decode(ecc::soften(ecc::encode(b))) == b);
  }
  for (std::size_t B = 1; B <= 30; ++B) {
    auto b = random_bits(B, rng);
    CHECK(ecc::viterbi_decode(ecc::soften(ecc::encode(b), 1e-3)) == b);
  }
}

TEST_CASE("Viterbi equals exhaustive maximum likelihood at B=8") {
  std::mt19937_64 rng(14);
  for (int i = 0; i < 200; ++i) {
    auto q = random_probs(ecc::coded_length(8), rng);
    CHECK(ecc::viterbi_decode(q) == oracle::brute_force_decode(q, 8));
  }
}

TEST_CASE("Viterbi output is at least as likely as every candidate") {
  std::mt19937_64 rng(15);
  for (std::size_t B : {3u, 6u, 10u}) {
    for (int i = 0; i < 10; ++i) {
      auto q = random_probs(ecc::coded_length(B), rng);
      const double best = oracle::log_likelihood(q, oracle::conv_encode(ecc::viterbi_decode(q)));
      for (std::uint64_t x = 0; x < (1U << B); ++x)
        CHECK(best >= oracle::log_likelihood(q, oracle::conv_encode(oracle::int_to_bits(x, B))) - 1e-9);
    }
  }
}

TEST_CASE("decoding is invariant to scaling the log-odds") {
  std::mt19937_64 rng(16);
  for (int i = 0; i < 100; ++i) {
    auto q = random_probs(ecc::coded_length(12), rng);
    const auto base = ecc::viterbi_decode(q);
    for (double scale : {0.25, 0.5, 2.0, 3.0}) {
      std::vector<double> scaled(q.size());
      for (std::size_t j = 0; j < q.size(); ++j) {
        const double logit = std::log(q[j] / (1.0 - q[j]));
        scaled[j] = 1.0 / (1.0 + std::exp(-scale * logit));
      }
      CHECK(ecc::viterbi_decode(scaled) == base);
    }
  }
}

TEST_CASE("decoder input validation") {
  CHECK_THROWS_AS(ecc::viterbi_decode(std::vector<double>(13, 0.5)), std::invalid_argument);
  CHECK_THROWS_AS(ecc::viterbi_decode(std::vector<double>(12, 0.5)), std::invalid_argument);
  std::vector<double> q(14, 0.5);
  q[3] = 0.0;
  CHECK_THROWS_AS(ecc::viterbi_decode(q), std::invalid_argument);
  q[3] = 1.0;
  CHECK_THROWS_AS(ecc::viterbi_decode(q), std::invalid_argument);
  q[3] = std::nan("");
  CHECK_THROWS_AS(ecc::viterbi_decode(q), std::invalid_argument);
  q[3] = 1.0 - 1e-12;  // inside (0,1), clamped internally
  CHECK_NOTHROW(ecc::viterbi_decode(q));
}

TEST_CASE("ties prefer bit 0") {
  // Uninformative channel: every path has the same metric.
  CHECK(ecc::viterbi_decode(std::vector<double>(ecc::coded_length(9), 0.5)) == BitArray(9, 0));
}

TEST_CASE("free distance") {
  CHECK(oracle::weight(oracle::conv_encode({1})) == 10);
  for (std::size_t probe = 8; probe <= 14; ++probe) CHECK(ecc::free_distance(probe) == kFreeDistance);
  CHECK(ecc::correctable_errors(kFreeDistance) == 4);

  // Minimum pairwise distance equals minimum nonzero weight (B = 6).
  std::size_t pairwise = 1000, nonzero = 1000;
  for (std::uint64_t a = 0; a < 64; ++a) {
    const auto ca = oracle::conv_encode(oracle::int_to_bits(a, 6));
    if (a) nonzero = std::min(nonzero, oracle::weight(ca));
    for (std::uint64_t b = a + 1; b < 64; ++b) {
      const auto cb = oracle::conv_encode(oracle::int_to_bits(b, 6));
      std::size_t d = 0;
      for (std::size_t i = 0; i < ca.size(); ++i) d += ca[i] != cb[i];
      pairwise = std::min(pairwise, d);
    }
  }
  CHECK(pairwise == nonzero);
  CHECK(ecc::free_distance(6) == pairwise);
  CHECK_THROWS_AS(ecc::free_distance(0), std::invalid_argument);
}

TEST_CASE("all patterns of up to 2 errors are corrected at B=15") {
  std::mt19937_64 rng(17);
  const std::size_t n = ecc::coded_length(15);
  for (int i = 0; i < 4; ++i) {
    auto b = random_bits(15, rng);
    const auto c = ecc::encode(b);
    for (std::size_t k = 1; k <= 2; ++k) {
      BitArray pattern(n, 0);
      for_each_pattern(n, k, 0, pattern, [&](const BitArray& e) {
        BitArray r(n);
        for (std::size_t j = 0; j < n; ++j) r[j] = c[j] ^ e[j];
        REQUIRE(ecc::viterbi_decode(ecc::soften(r)) == b);
      });
    }
  }
}

TEST_CASE("sampled patterns of 3 and 4 errors are corrected at B=15 and B=16") {
  std::mt19937_64 rng(18);
  for (std::size_t B : {15u, 16u}) {
    for (int i = 0; i < 500; ++i) {
      auto b = random_bits(B, rng);
      const std::size_t k = 3 + i % 2;
      auto r = ecc::channel_flip(ecc::encode(b), k, rng());
      CHECK(ecc::viterbi_decode(ecc::soften(r)) == b);
    }
  }
}

TEST_CASE("soft decoding agrees with the hard-decision baseline within the guarantee") {
  std::mt19937_64 rng(19);
  for (int i = 0; i < 100; ++i) {
    auto b = random_bits(8, rng);
    auto r = ecc::channel_flip(ecc::encode(b), i % 5, rng());
    CHECK(oracle::hard_decode(r, 8) == b);
    CHECK(ecc::viterbi_decode(ecc::soften(r)) == b);
  }
}

TEST_CASE("burst errors (reported, not asserted)") {
  std::mt19937_64 rng(20);
  const std::size_t B = 16, n = ecc::coded_length(B);
  for (std::size_t len : {4u, 5u, 6u, 8u}) {
    std::size_t ok = 0, trials = 300;
    for (std::size_t i = 0; i < trials; ++i) {
      auto b = random_bits(B, rng);
      auto c = ecc::encode(b);
      const std::size_t start = rng() % (n - len + 1);
      for (std::size_t j = start; j < start + len; ++j) c[j] ^= 1U;
      ok += ecc::viterbi_decode(ecc::soften(c)) == b;
    }
    MESSAGE("burst length " << len << ": recovered " << ok << "/" << trials);
  }
}

TEST_CASE("channel_flip") {
  BitArray zeros(44, 0);
  CHECK(ecc::channel_flip(zeros, 0, 5) == zeros);
  CHECK(ecc::channel_flip(zeros, 44, 5) == BitArray(44, 1));
  CHECK_THROWS_AS(ecc::channel_flip(zeros, 45, 5), std::invalid_argument);

  // Frozen at first run.
  const auto fixed = ecc::channel_flip(zeros, 2, 42);
  CHECK(bits_to_string(fixed) == "00000000000000000000000000001000010000000000");
  CHECK(ecc::channel_flip(zeros, 2, 42) == fixed);

  std::mt19937_64 rng(21);
  for (std::size_t k = 0; k <= 44; ++k) {
    auto b = random_bits(44, rng);
    CHECK(hamming_distance(b, ecc::channel_flip(b, k, rng())) == k);
  }
}

TEST_CASE("simulate") {
  auto clean = ecc::simulate(16, 4, 300, 1);
  CHECK(clean.trials == 300);
  CHECK(clean.recovered == 300);
  CHECK(clean.recovery_rate() == 1.0);
  auto again = ecc::simulate(16, 9, 300, 1);
  CHECK(again.recovered == ecc::simulate(16, 9, 300, 1).recovered);
  CHECK(again.recovered < 300);
  CHECK_THROWS_AS(ecc::simulate(4, 21, 10, 1), std::invalid_argument);
}
