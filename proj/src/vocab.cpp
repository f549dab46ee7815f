#include "bitvoc/vocab.hpp"

#include <algorithm>
#include <charconv>
#include <istream>
#include <ostream>
#include <stdexcept>

namespace bitvoc {

namespace {

bool ranks_before(const VocabEntry& a, const VocabEntry& b) {
  if (a.count != b.count) return a.count > b.count;
  return a.surface < b.surface;
}

void check_width(const Vocabulary& vocab, std::size_t B) {
  if (B < ceil_log2(vocab.size()))
    throw std::invalid_argument("bit width " + std::to_string(B) + " cannot represent " +
                                std::to_string(vocab.size()) + " words");
}

}  // namespace

bool Vocabulary::is_marker(std::string_view surface) {
  return surface == kUnkSurface || surface == kBosSurface || surface == kEosSurface;
}

Vocabulary Vocabulary::from_counts(std::vector<VocabEntry> entries, std::size_t max_size) {
  if (max_size < kNumMarkers + 1) throw std::invalid_argument("vocabulary size must be at least 4");
  std::sort(entries.begin(), entries.end(), ranks_before);
  if (entries.size() > max_size - kNumMarkers) entries.resize(max_size - kNumMarkers);

  Vocabulary v;
  v.index_.reserve(entries.size());
  for (std::size_t i = 0; i < entries.size(); ++i) {
    if (is_marker(entries[i].surface))
      throw std::invalid_argument("reserved surface in vocabulary: " + entries[i].surface);
    auto [it, inserted] = v.index_.emplace(entries[i].surface, static_cast<WordId>(i + kNumMarkers));
    if (!inserted) throw std::invalid_argument("duplicate surface in vocabulary: " + entries[i].surface);
  }
  v.words_ = std::move(entries);
  return v;
}

WordId Vocabulary::id(std::string_view surface) const {
  if (surface == kBosSurface) return kBos;
  if (surface == kEosSurface) return kEos;
  auto it = index_.find(std::string(surface));
  return it == index_.end() ? kUnk : it->second;
}

const std::string& Vocabulary::surface(WordId id) const {
  static const std::string markers[] = {std::string(kUnkSurface), std::string(kBosSurface),
                                        std::string(kEosSurface)};
  if (id < kNumMarkers) return markers[id];
  if (id >= size()) throw std::out_of_range("word id out of range");
  return words_[id - kNumMarkers].surface;
}

std::uint64_t Vocabulary::count(WordId id) const {
  if (id < kNumMarkers) return 0;
  if (id >= size()) throw std::out_of_range("word id out of range");
  return words_[id - kNumMarkers].count;
}

std::size_t Vocabulary::rank(WordId id) const {
  if (id >= size()) throw std::out_of_range("word id out of range");
  return id < kNumMarkers ? 0 : id - (kNumMarkers - 1);
}

Vocabulary build_vocabulary(std::span<const std::string> tokens, std::size_t V) {
  if (V < kNumMarkers + 1) throw std::invalid_argument("vocabulary size must be at least 4");
  if (tokens.empty()) throw std::invalid_argument("empty token stream");
  std::unordered_map<std::string, std::uint64_t> counts;
  for (const auto& t : tokens)
    if (!Vocabulary::is_marker(t)) ++counts[t];
  std::vector<VocabEntry> entries;
  entries.reserve(counts.size());
  for (auto& [surface, count] : counts) entries.push_back({surface, count});
  return Vocabulary::from_counts(std::move(entries), V);
}

Vocabulary build_vocabulary(std::istream& text, std::size_t V) {
  std::vector<std::string> tokens;
  for (std::string tok; text >> tok;) tokens.push_back(std::move(tok));
  return build_vocabulary(tokens, V);
}

void save_vocabulary(const Vocabulary& vocab, std::ostream& out) {
  for (const auto& e : vocab.words()) out << e.surface << '\t' << e.count << '\n';
}

Vocabulary load_vocabulary(std::istream& in) {
  std::vector<VocabEntry> entries;
  std::size_t lineno = 0;
  for (std::string line; std::getline(in, line);) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto tab = line.rfind('\t');
    if (tab == std::string::npos || tab == 0)
      throw std::invalid_argument("vocabulary line " + std::to_string(lineno) + ": expected surface<TAB>count");
    std::uint64_t count = 0;
    const char* first = line.data() + tab + 1;
    const char* last = line.data() + line.size();
    auto [ptr, ec] = std::from_chars(first, last, count);
    if (ec != std::errc{} || ptr != last || first == last)
      throw std::invalid_argument("vocabulary line " + std::to_string(lineno) + ": bad count");
    entries.push_back({line.substr(0, tab), count});
  }
  if (entries.empty()) throw std::invalid_argument("vocabulary file has no entries");
  const std::size_t n = entries.size();
  return Vocabulary::from_counts(std::move(entries), n + kNumMarkers);
}

BitArray word_to_bits(const Vocabulary& vocab, std::size_t B, WordId w) {
  check_width(vocab, B);
  if (w >= vocab.size()) throw std::invalid_argument("word id out of range");
  return index_to_bits(w, B);
}

WordId bits_to_word(const Vocabulary& vocab, std::span<const std::uint8_t> bits) {
  auto x = bits_to_index(bits);
  if (!x || *x >= vocab.size()) return kUnk;
  return static_cast<WordId>(*x);
}

Codebook::Codebook(const Vocabulary& vocab, std::size_t B)
    : vocab_size_(vocab.size()), bits_(B == 0 ? ceil_log2(vocab.size()) : B) {
  check_width(vocab, bits_);
}

BitArray Codebook::encode(WordId w) const {
  if (w >= vocab_size_) throw std::invalid_argument("word id out of range");
  return index_to_bits(w, bits_);
}

WordId Codebook::decode(std::span<const std::uint8_t> bits) const {
  if (bits.size() != bits_) throw std::invalid_argument("bit array length does not match codebook width");
  auto x = bits_to_index(bits);
  if (!x || *x >= vocab_size_) return kUnk;
  return static_cast<WordId>(*x);
}

}  // namespace bitvoc
