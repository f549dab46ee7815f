#pragma once

// Rate-1/2 terminated convolutional code with memory 6 and a soft-decision
// Viterbi decoder over bit probabilities.
//
// Conventions shared by encoder and decoder:
//   - the 7-bit window at step t is x[t-6..t], oldest first;
//   - tap j multiplies window position j (tap 0 meets x[t-6]);
//   - the 6 bits of trellis state s_t are x[t-5..t], oldest first, so the
//     bit Algorithm-style traceback reads out (s'_1) is the oldest one.
// A block of B input bits is flushed with 6 zeros and yields 2(B+6) output
// bits interleaved as y_1^1, y_1^2, y_2^1, y_2^2, ...

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "bitvoc/bits.hpp"

namespace bitvoc::ecc {

inline constexpr std::size_t kMemory = 6;
inline constexpr std::size_t kWindow = kMemory + 1;
inline constexpr std::size_t kStates = std::size_t{1} << kMemory;

inline constexpr std::array<std::uint8_t, kWindow> kTaps1 = {1, 0, 0, 1, 1, 1, 1};
inline constexpr std::array<std::uint8_t, kWindow> kTaps2 = {1, 1, 0, 1, 1, 0, 1};

// Clamp applied to probabilities before taking logs.
inline constexpr double kProbEpsilon = 1e-6;
// Stands in for log(0) in the path metric.
inline constexpr double kNegInf = -1e18;

// Window packed with position j at bit j.
using Window = std::uint8_t;

// Dot product of the window with a tap vector, mod 2.
std::uint8_t tap_parity(Window window, std::span<const std::uint8_t, kWindow> taps);

// 2(B + 6).
constexpr std::size_t coded_length(std::size_t B) { return 2 * (B + kMemory); }

BitArray encode(std::span<const std::uint8_t> bits);

// Maps each q_i into [kProbEpsilon, 1 - kProbEpsilon].
std::vector<double> clamp_probabilities(std::span<const double> q);

// Maximum-likelihood input block for the observed bit probabilities q of a
// coded block (length 2(B+6), B >= 1). Every q_i must lie strictly inside
// (0, 1); values are clamped before use. Ties prefer bit 0.
BitArray viterbi_decode(std::span<const double> q);

// Same search on precomputed per-position log-probabilities:
// log_one[i] = log q_i, log_zero[i] = log(1 - q_i).
BitArray viterbi_decode_log(std::span<const double> log_one, std::span<const double> log_zero);

// sum_i b'_i log q_i + (1 - b'_i) log(1 - q_i), clamped like the decoder.
double codeword_log_likelihood(std::span<const double> q, std::span<const std::uint8_t> codeword);

// Minimum weight of encode(b) over nonzero b of length probe_bits.
std::size_t free_distance(std::size_t probe_bits = 12);

// Number of bit errors the code is guaranteed to correct, floor((d-1)/2).
constexpr std::size_t correctable_errors(std::size_t d) { return d == 0 ? 0 : (d - 1) / 2; }

// Flips exactly k distinct positions chosen uniformly by a generator seeded
// with `seed`. Throws std::invalid_argument when k > bits.size().
BitArray channel_flip(std::span<const std::uint8_t> bits, std::size_t k, std::uint64_t seed);

// Noiseless soft channel: 1 -> 1 - eps, 0 -> eps.
std::vector<double> soften(std::span<const std::uint8_t> bits, double eps = 0.01);

struct SimulationResult {
  std::size_t trials = 0;
  std::size_t recovered = 0;
  double recovery_rate() const { return trials ? static_cast<double>(recovered) / trials : 0.0; }
};

// Random B-bit blocks, k flipped coded bits each, softened and decoded.
SimulationResult simulate(std::size_t B, std::size_t flips, std::size_t trials, std::uint64_t seed);

}  // namespace bitvoc::ecc
