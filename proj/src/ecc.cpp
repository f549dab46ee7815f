#include "bitvoc/ecc.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>
#include <string>

namespace bitvoc::ecc {

namespace {

constexpr Window kStateMask = kStates - 1;

constexpr std::uint8_t taps_mask(std::span<const std::uint8_t, kWindow> taps) {
  std::uint8_t m = 0;
  for (std::size_t j = 0; j < kWindow; ++j) m |= static_cast<std::uint8_t>((taps[j] & 1U) << j);
  return m;
}

constexpr std::uint8_t parity(Window window, std::uint8_t mask) {
  return static_cast<std::uint8_t>(std::popcount(static_cast<unsigned>(window & mask)) & 1);
}

// Output pair for every 7-bit window, bit 0 = y^1, bit 1 = y^2.
constexpr auto kPairs = [] {
  std::array<std::uint8_t, 1U << kWindow> pair{};
  constexpr auto m1 = taps_mask(kTaps1);
  constexpr auto m2 = taps_mask(kTaps2);
  for (unsigned w = 0; w < pair.size(); ++w) {
    auto win = static_cast<Window>(w);
    pair[w] = static_cast<std::uint8_t>(parity(win, m1) | (parity(win, m2) << 1));
  }
  return pair;
}();

std::size_t block_length(std::size_t coded) {
  if (coded % 2 != 0 || coded < coded_length(1))
    throw std::invalid_argument("coded block length must be 2(B+6) with B >= 1, got " + std::to_string(coded));
  return coded / 2 - kMemory;
}

double clamp_one(double q) { return std::clamp(q, kProbEpsilon, 1.0 - kProbEpsilon); }

}  // namespace

std::uint8_t tap_parity(Window window, std::span<const std::uint8_t, kWindow> taps) {
  return parity(window, taps_mask(taps));
}

BitArray encode(std::span<const std::uint8_t> bits) {
  if (bits.empty()) throw std::invalid_argument("encode: empty input");
  const std::size_t steps = bits.size() + kMemory;
  BitArray out(2 * steps);
  Window window = 0;
  for (std::size_t t = 0; t < steps; ++t) {
    const unsigned in = t < bits.size() ? (bits[t] & 1U) : 0U;
    window = static_cast<Window>((window >> 1) | (in << kMemory));
    out[2 * t] = kPairs[window] & 1U;
    out[2 * t + 1] = (kPairs[window] >> 1) & 1U;
  }
  return out;
}

std::vector<double> clamp_probabilities(std::span<const double> q) {
  std::vector<double> out(q.size());
  std::transform(q.begin(), q.end(), out.begin(), clamp_one);
  return out;
}

BitArray viterbi_decode(std::span<const double> q) {
  block_length(q.size());
  std::vector<double> log_one(q.size()), log_zero(q.size());
  for (std::size_t i = 0; i < q.size(); ++i) {
    if (!(q[i] > 0.0 && q[i] < 1.0))
      throw std::invalid_argument("viterbi_decode: probability at " + std::to_string(i) + " outside (0,1)");
    const double c = clamp_one(q[i]);
    log_one[i] = std::log(c);
    log_zero[i] = std::log1p(-c);
  }
  return viterbi_decode_log(log_one, log_zero);
}

BitArray viterbi_decode_log(std::span<const double> log_one, std::span<const double> log_zero) {
  if (log_one.size() != log_zero.size()) throw std::invalid_argument("viterbi_decode_log: length mismatch");
  const std::size_t B = block_length(log_one.size());
  const std::size_t steps = B + kMemory;

  std::array<double, kStates> metric_a;
  std::array<double, kStates> metric_b;
  double* phi = metric_a.data();
  double* next = metric_b.data();
  std::fill_n(phi, kStates, kNegInf);
  phi[0] = 0.0;
  // survivors[t * kStates + s] = predecessor of state s at step t
  std::vector<std::uint8_t> survivors(steps * kStates);

  for (std::size_t t = 0; t < steps; ++t) {
    // branch metric indexed by output pair (bit 0 = y^1, bit 1 = y^2)
    const double g[4] = {
        log_zero[2 * t] + log_zero[2 * t + 1],
        log_one[2 * t] + log_zero[2 * t + 1],
        log_zero[2 * t] + log_one[2 * t + 1],
        log_one[2 * t] + log_one[2 * t + 1],
    };
    std::uint8_t* r = &survivors[t * kStates];
    for (unsigned cur = 0; cur < kStates; ++cur) {
      const unsigned shifted = cur << 1;
      const unsigned prev0 = shifted & kStateMask;
      const double m0 = phi[prev0] + g[kPairs[shifted]];
      const double m1 = phi[prev0 | 1U] + g[kPairs[shifted | 1U]];
      const bool take1 = m1 > m0;
      next[cur] = take1 ? m1 : m0;
      r[cur] = static_cast<std::uint8_t>(prev0 | static_cast<unsigned>(take1));
    }
    std::swap(phi, next);
  }

  BitArray out(B);
  unsigned state = 0;
  for (std::size_t t = B; t-- > 0;) {
    state = survivors[(t + kMemory) * kStates + state];
    out[t] = static_cast<std::uint8_t>(state & 1U);
  }
  return out;
}

double codeword_log_likelihood(std::span<const double> q, std::span<const std::uint8_t> codeword) {
  if (q.size() != codeword.size()) throw std::invalid_argument("codeword_log_likelihood: length mismatch");
  double ll = 0.0;
  for (std::size_t i = 0; i < q.size(); ++i) {
    const double c = clamp_one(q[i]);
    ll += codeword[i] ? std::log(c) : std::log1p(-c);
  }
  return ll;
}

std::size_t free_distance(std::size_t probe_bits) {
  if (probe_bits == 0 || probe_bits > 24) throw std::invalid_argument("free_distance: probe width must be in [1, 24]");
  std::size_t best = coded_length(probe_bits);
  for (std::uint64_t x = 1; x < (std::uint64_t{1} << probe_bits); ++x)
    best = std::min(best, hamming_weight(encode(index_to_bits(x, probe_bits))));
  return best;
}

BitArray channel_flip(std::span<const std::uint8_t> bits, std::size_t k, std::uint64_t seed) {
  if (k > bits.size())
    throw std::invalid_argument("channel_flip: cannot flip " + std::to_string(k) + " of " +
                                std::to_string(bits.size()) + " bits");
  std::mt19937_64 rng(seed);
  std::vector<std::size_t> positions(bits.size());
  std::iota(positions.begin(), positions.end(), std::size_t{0});
  BitArray out(bits.begin(), bits.end());
  for (std::size_t i = 0; i < k; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, positions.size() - 1);
    std::swap(positions[i], positions[pick(rng)]);
    out[positions[i]] ^= 1U;
  }
  return out;
}

std::vector<double> soften(std::span<const std::uint8_t> bits, double eps) {
  std::vector<double> q(bits.size());
  for (std::size_t i = 0; i < bits.size(); ++i) q[i] = bits[i] ? 1.0 - eps : eps;
  return q;
}

SimulationResult simulate(std::size_t B, std::size_t flips, std::size_t trials, std::uint64_t seed) {
  if (B == 0) throw std::invalid_argument("simulate: B must be positive");
  if (flips > coded_length(B)) throw std::invalid_argument("simulate: more flips than coded bits");
  std::mt19937_64 rng(seed);
  std::bernoulli_distribution coin(0.5);
  SimulationResult result;
  for (std::size_t i = 0; i < trials; ++i) {
    BitArray b(B);
    for (auto& bit : b) bit = coin(rng);
    auto noisy = channel_flip(encode(b), flips, rng());
    ++result.trials;
    if (viterbi_decode(soften(noisy)) == b) ++result.recovered;
  }
  return result;
}

}  // namespace bitvoc::ecc
