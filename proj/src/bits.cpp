#include "bitvoc/bits.hpp"

#include <bit>
#include <stdexcept>

namespace bitvoc {

std::size_t ceil_log2(std::uint64_t n) {
  if (n <= 1) return 0;
  return static_cast<std::size_t>(std::bit_width(n - 1));
}

BitArray index_to_bits(std::uint64_t x, std::size_t width) {
  BitArray bits(width, 0);
  for (std::size_t i = 0; i < width && i < 64; ++i) bits[i] = static_cast<std::uint8_t>((x >> i) & 1U);
  return bits;
}

std::optional<std::uint64_t> bits_to_index(std::span<const std::uint8_t> bits) {
  std::uint64_t x = 0;
  for (std::size_t i = 0; i < bits.size(); ++i) {
    if (!bits[i]) continue;
    if (i >= 64) return std::nullopt;
    x |= std::uint64_t{1} << i;
  }
  return x;
}

std::string bits_to_string(std::span<const std::uint8_t> bits) {
  std::string s;
  s.reserve(bits.size());
  for (auto b : bits) s.push_back(b ? '1' : '0');
  return s;
}

BitArray bits_from_string(std::string_view text) {
  BitArray bits;
  bits.reserve(text.size());
  for (char c : text) {
    if (c != '0' && c != '1')
      throw std::invalid_argument("bit string may only contain '0' and '1': " + std::string(text));
    bits.push_back(c == '1');
  }
  return bits;
}

std::size_t hamming_weight(std::span<const std::uint8_t> bits) {
  std::size_t w = 0;
  for (auto b : bits) w += b != 0;
  return w;
}

std::size_t hamming_distance(std::span<const std::uint8_t> a, std::span<const std::uint8_t> b) {
  if (a.size() != b.size()) throw std::invalid_argument("hamming_distance: length mismatch");
  std::size_t d = 0;
  for (std::size_t i = 0; i < a.size(); ++i) d += (a[i] != 0) != (b[i] != 0);
  return d;
}

}  // namespace bitvoc
