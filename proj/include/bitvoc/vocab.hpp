#pragma once

// Frequency-ranked vocabularies and the minimal word <-> bit-array code.
//
// Word ids double as code indices: UNK=0, BOS=1, EOS=2, and the word of
// frequency rank r (1-based) gets id 2 + r. The bit array of a word is the
// binary expansion of its id, least significant bit first, so the most
// frequent words only ever set the low bits.

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "bitvoc/bits.hpp"

namespace bitvoc {

using WordId = std::uint32_t;

inline constexpr WordId kUnk = 0;
inline constexpr WordId kBos = 1;
inline constexpr WordId kEos = 2;
inline constexpr std::size_t kNumMarkers = 3;

inline constexpr std::string_view kUnkSurface = "<unk>";
inline constexpr std::string_view kBosSurface = "<s>";
inline constexpr std::string_view kEosSurface = "</s>";

struct VocabEntry {
  std::string surface;
  std::uint64_t count = 0;
};

// Immutable after construction.
class Vocabulary {
 public:
  // Ranks `entries` by descending count, ties by byte-wise surface order, and
  // keeps the top max_size - 3. Marker surfaces are rejected.
  static Vocabulary from_counts(std::vector<VocabEntry> entries, std::size_t max_size);

  // V, markers included.
  std::size_t size() const { return words_.size() + kNumMarkers; }

  // UNK for out-of-vocabulary surfaces.
  WordId id(std::string_view surface) const;
  const std::string& surface(WordId id) const;
  std::uint64_t count(WordId id) const;
  // 1-based frequency rank of a non-marker word; 0 for markers.
  std::size_t rank(WordId id) const;

  // Non-marker words in rank order.
  std::span<const VocabEntry> words() const { return words_; }

  static bool is_marker(std::string_view surface);

 private:
  Vocabulary() = default;

  std::vector<VocabEntry> words_;
  std::unordered_map<std::string, WordId> index_;
};

// Counts tokens and keeps the V - 3 most frequent. When the stream has fewer
// distinct types the vocabulary is smaller than V. Marker surfaces in the
// stream are not counted.
Vocabulary build_vocabulary(std::span<const std::string> tokens, std::size_t V);
// Whitespace-separated tokens.
Vocabulary build_vocabulary(std::istream& text, std::size_t V);

// One `surface<TAB>count` line per non-marker word, descending count.
void save_vocabulary(const Vocabulary& vocab, std::ostream& out);
Vocabulary load_vocabulary(std::istream& in);

BitArray word_to_bits(const Vocabulary& vocab, std::size_t B, WordId w);
// Total: any array whose index is >= V (or does not fit) maps to UNK.
WordId bits_to_word(const Vocabulary& vocab, std::span<const std::uint8_t> bits);

// Fixed-width view of the mapping above.
class Codebook {
 public:
  // B == 0 selects the minimum width ceil(log2 V).
  explicit Codebook(const Vocabulary& vocab, std::size_t B = 0);

  std::size_t bits() const { return bits_; }
  std::size_t vocab_size() const { return vocab_size_; }

  BitArray encode(WordId w) const;
  // Throws std::invalid_argument on length mismatch.
  WordId decode(std::span<const std::uint8_t> bits) const;

 private:
  std::size_t vocab_size_;
  std::size_t bits_;
};

}  // namespace bitvoc
