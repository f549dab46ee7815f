#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace bitvoc {

// One element per bit, each 0 or 1. Index 0 holds b_1 (least significant).
using BitArray = std::vector<std::uint8_t>;

// Smallest B with 2^B >= n. ceil_log2(1) == 0.
std::size_t ceil_log2(std::uint64_t n);

// b_i = floor(x / 2^(i-1)) mod 2 for i = 1..width.
BitArray index_to_bits(std::uint64_t x, std::size_t width);

// Inverse of index_to_bits. nullopt when the value does not fit in 64 bits.
std::optional<std::uint64_t> bits_to_index(std::span<const std::uint8_t> bits);

// ASCII '0'/'1', b_1 leftmost.
std::string bits_to_string(std::span<const std::uint8_t> bits);
BitArray bits_from_string(std::string_view text);  // throws std::invalid_argument

std::size_t hamming_weight(std::span<const std::uint8_t> bits);
std::size_t hamming_distance(std::span<const std::uint8_t> a, std::span<const std::uint8_t> b);

}  // namespace bitvoc
