#pragma once

// Output layers over a hidden vector h:
//
//   Softmax     V-way softmax.
//   Binary      B logistic units, one per bit of the word code.
//   BinaryEC    B' = 2(B+6) logistic units predicting the convolutional codeword.
//   Hybrid      N-way softmax over the N-1 most frequent ids plus OTHER (last
//               slot), and B logistic units for the remaining words.
//   HybridEC    Hybrid with the bit part convolutionally coded.
//
// All kinds are a single affine map W h + beta followed by a per-slice
// nonlinearity. In the hybrid kinds the softmax rows come first.

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "bitvoc/bits.hpp"
#include "bitvoc/linalg.hpp"
#include "bitvoc/vocab.hpp"

namespace bitvoc::head {

enum class Kind { softmax, binary, hybrid, binary_ec, hybrid_ec };

enum class BitLoss { squared, cross_entropy };

// How rare words in the hybrid kinds are coded.
//   global    - the word keeps its vocabulary code (id), B = ceil(log2 V)
//   rare_rank - code = id - (N-1), B = ceil(log2 (V - N + 1))
enum class RareCodes { global, rare_rank };

bool is_hybrid(Kind k);
bool uses_ecc(Kind k);
bool has_softmax(Kind k);
bool has_bits(Kind k);

struct HeadConfig {
  Kind kind = Kind::softmax;
  std::size_t vocab_size = 0;    // V
  std::size_t hidden = 0;        // H
  std::size_t softmax_size = 0;  // N, hybrid kinds only
  double lambda_softmax = 1.0;
  double lambda_bits = 1.0;
  BitLoss bit_loss = BitLoss::squared;
  RareCodes rare_codes = RareCodes::global;

  // Throws std::invalid_argument.
  void validate() const;
};

// "softmax", "binary", "binary-ec", "hybrid-512", "hybrid-512-ec".
std::string kind_name(const HeadConfig& cfg);
// Sets kind and softmax_size from a name produced by kind_name.
void parse_kind(std::string_view name, HeadConfig& cfg);

struct Layout {
  std::size_t softmax_rows = 0;  // V, N or 0
  std::size_t data_bits = 0;     // B, 0 for softmax
  std::size_t code_bits = 0;     // B or B', 0 for softmax
  std::size_t rows() const { return softmax_rows + code_bits; }
};

Layout layout(const HeadConfig& cfg);

struct ParamCount {
  std::size_t rows = 0;         // #out
  std::size_t params = 0;       // #W,beta = rows * H + rows
  double ratio_to_softmax = 0;  // softmax params / params
};

ParamCount param_count(const HeadConfig& cfg);

// True when w is predicted by the softmax part (all words for Softmax).
bool in_softmax(const HeadConfig& cfg, WordId w);
// Index of w within the softmax slice; OTHER for rare words of hybrid kinds.
std::size_t softmax_slot(const HeadConfig& cfg, WordId w);
// Bits the logistic part is trained towards for a bit-coded word: b(w), or
// encode(b(w)) for the EC kinds.
BitArray target_bits(const HeadConfig& cfg, WordId w);
// Word for a decoded data-bit array (length B); UNK if not a valid code, or
// if it names a softmax word of a hybrid kind.
WordId word_from_bits(const HeadConfig& cfg, std::span<const std::uint8_t> data_bits);

struct HeadParams {
  Matrix weight;              // rows x H
  std::vector<double> bias;   // rows
};

HeadParams zero_params(const HeadConfig& cfg);
// Uniform in [-scale, scale].
HeadParams random_params(const HeadConfig& cfg, std::uint64_t seed, double scale = 0.1);

// Numerically stable softmax (max-logit subtraction).
std::vector<double> softmax(std::span<const double> logits);
double sigmoid(double x);

std::vector<double> softmax_forward(const HeadParams& params, std::span<const double> h);
// Cross-entropy -log v[target].
double softmax_loss(std::span<const double> v, std::size_t target);

std::vector<double> binary_forward(const HeadParams& params, std::span<const double> h);
// prod_i (b_i q_i + (1 - b_i)(1 - q_i)).
double word_probability(std::span<const double> q, std::span<const std::uint8_t> bits);
double log_word_probability(std::span<const double> q, std::span<const std::uint8_t> bits);
// squared: sum (q_i - b_i)^2. cross-entropy: -sum(b log q + (1-b) log(1-q)),
// q clamped to [1e-6, 1 - 1e-6].
double bit_loss(std::span<const double> q, std::span<const std::uint8_t> target, BitLoss flavor);

struct HeadOutput {
  std::vector<double> probs;  // softmax distribution (V entries) or hybrid slice (N)
  std::vector<double> bits;   // bit posterior q (B or B')
};

// Splits logits (layout(cfg).rows() entries) into softmax and bit posteriors.
HeadOutput activate(const HeadConfig& cfg, std::span<const double> logits);
double head_loss(const HeadConfig& cfg, const HeadOutput& out, WordId w);

HeadOutput hybrid_forward(const HeadConfig& cfg, const HeadParams& params, std::span<const double> h);
double hybrid_loss(const HeadConfig& cfg, const HeadOutput& out, WordId w);

struct Prediction {
  WordId word = kUnk;
  std::vector<double> bits;   // bit posterior, when the head has one
  std::vector<double> probs;  // softmax distribution or slice, when present
  double score = 0.0;         // log-probability of the chosen outcome
};

Prediction predict(const HeadConfig& cfg, HeadOutput out);
double probability(const HeadConfig& cfg, const HeadOutput& out, WordId w);

class Head {
 public:
  Head(HeadConfig cfg, HeadParams params);

  const HeadConfig& config() const { return cfg_; }
  const Layout& geometry() const { return layout_; }
  const HeadParams& params() const { return params_; }

  // Throws std::invalid_argument on a non-finite or mis-sized h.
  HeadOutput forward(std::span<const double> h) const;
  // Splits precomputed logits (rows entries) the same way forward does.
  HeadOutput activate(std::span<const double> logits) const;

  double loss(const HeadOutput& out, WordId w) const;
  Prediction predict(std::span<const double> h) const;
  Prediction predict(HeadOutput out) const;
  // Pr(w | h). For hybrid kinds the rare branch is OTHER * Pr(code | q).
  double probability(const HeadOutput& out, WordId w) const;

 private:
  HeadConfig cfg_;
  Layout layout_;
  HeadParams params_;
};

}  // namespace bitvoc::head
