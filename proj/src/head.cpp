#include "bitvoc/head.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>

#include "bitvoc/ecc.hpp"

namespace bitvoc::head {

namespace {

void check_finite(std::span<const double> h) {
  for (double x : h)
    if (!std::isfinite(x)) throw std::invalid_argument("hidden vector has non-finite entries");
}

double clamp_prob(double q) { return std::clamp(q, ecc::kProbEpsilon, 1.0 - ecc::kProbEpsilon); }

HeadOutput split_logits(const Layout& l, std::span<const double> logits) {
  if (logits.size() != l.rows()) throw std::invalid_argument("logit count does not match head rows");
  HeadOutput out;
  out.probs = softmax(logits.first(l.softmax_rows));
  out.bits.resize(l.code_bits);
  auto bit_logits = logits.subspan(l.softmax_rows);
  for (std::size_t i = 0; i < bit_logits.size(); ++i) out.bits[i] = sigmoid(bit_logits[i]);
  return out;
}

std::size_t argmax(std::span<const double> v) {
  return static_cast<std::size_t>(std::max_element(v.begin(), v.end()) - v.begin());
}

// Rare words of hybrid kinds with rare_rank coding are shifted down by this.
std::size_t code_offset(const HeadConfig& cfg) {
  return is_hybrid(cfg.kind) && cfg.rare_codes == RareCodes::rare_rank ? cfg.softmax_size - 1 : 0;
}

}  // namespace

bool is_hybrid(Kind k) { return k == Kind::hybrid || k == Kind::hybrid_ec; }
bool uses_ecc(Kind k) { return k == Kind::binary_ec || k == Kind::hybrid_ec; }
bool has_softmax(Kind k) { return k == Kind::softmax || is_hybrid(k); }
bool has_bits(Kind k) { return k != Kind::softmax; }

void HeadConfig::validate() const {
  if (vocab_size < kNumMarkers + 1) throw std::invalid_argument("vocabulary size must be at least 4");
  if (hidden == 0) throw std::invalid_argument("hidden width must be positive");
  if (is_hybrid(kind)) {
    if (softmax_size < 2) throw std::invalid_argument("hybrid softmax size must be at least 2");
    if (softmax_size >= vocab_size) throw std::invalid_argument("hybrid softmax size must be smaller than V");
  }
  if (!(lambda_softmax >= 0.0) || !(lambda_bits >= 0.0))
    throw std::invalid_argument("loss weights must be nonnegative");
}

std::string kind_name(const HeadConfig& cfg) {
  switch (cfg.kind) {
    case Kind::softmax: return "softmax";
    case Kind::binary: return "binary";
    case Kind::binary_ec: return "binary-ec";
    case Kind::hybrid: return "hybrid-" + std::to_string(cfg.softmax_size);
    case Kind::hybrid_ec: return "hybrid-" + std::to_string(cfg.softmax_size) + "-ec";
  }
  return "?";
}

void parse_kind(std::string_view name, HeadConfig& cfg) {
  if (name == "softmax") {
    cfg.kind = Kind::softmax;
  } else if (name == "binary") {
    cfg.kind = Kind::binary;
  } else if (name == "binary-ec") {
    cfg.kind = Kind::binary_ec;
  } else if (name.starts_with("hybrid-")) {
    std::string_view rest = name.substr(7);
    bool ec = false;
    if (rest.ends_with("-ec")) {
      ec = true;
      rest.remove_suffix(3);
    }
    std::size_t n = 0;
    auto [ptr, err] = std::from_chars(rest.data(), rest.data() + rest.size(), n);
    if (err != std::errc{} || ptr != rest.data() + rest.size() || rest.empty())
      throw std::invalid_argument("bad hybrid head name: " + std::string(name));
    cfg.kind = ec ? Kind::hybrid_ec : Kind::hybrid;
    cfg.softmax_size = n;
  } else {
    throw std::invalid_argument("unknown head kind: " + std::string(name));
  }
}

Layout layout(const HeadConfig& cfg) {
  Layout l;
  switch (cfg.kind) {
    case Kind::softmax:
      l.softmax_rows = cfg.vocab_size;
      return l;
    case Kind::binary:
    case Kind::binary_ec:
      l.data_bits = ceil_log2(cfg.vocab_size);
      break;
    case Kind::hybrid:
    case Kind::hybrid_ec:
      l.softmax_rows = cfg.softmax_size;
      l.data_bits = ceil_log2(cfg.vocab_size - code_offset(cfg));
      break;
  }
  l.code_bits = uses_ecc(cfg.kind) ? ecc::coded_length(l.data_bits) : l.data_bits;
  return l;
}

ParamCount param_count(const HeadConfig& cfg) {
  cfg.validate();
  ParamCount pc;
  pc.rows = layout(cfg).rows();
  pc.params = pc.rows * cfg.hidden + pc.rows;
  const double softmax_params = static_cast<double>(cfg.vocab_size * cfg.hidden + cfg.vocab_size);
  pc.ratio_to_softmax = softmax_params / static_cast<double>(pc.params);
  return pc;
}

bool in_softmax(const HeadConfig& cfg, WordId w) {
  if (cfg.kind == Kind::softmax) return true;
  if (is_hybrid(cfg.kind)) return w + 1 < cfg.softmax_size;
  return false;
}

std::size_t softmax_slot(const HeadConfig& cfg, WordId w) {
  if (!has_softmax(cfg.kind)) throw std::invalid_argument("head has no softmax part");
  return in_softmax(cfg, w) ? w : cfg.softmax_size - 1;
}

BitArray target_bits(const HeadConfig& cfg, WordId w) {
  if (!has_bits(cfg.kind)) throw std::invalid_argument("head has no bit part");
  if (w >= cfg.vocab_size) throw std::invalid_argument("word id out of range");
  const std::size_t offset = code_offset(cfg);
  if (w < offset) throw std::invalid_argument("frequent word has no rare-rank code");
  auto bits = index_to_bits(w - offset, layout(cfg).data_bits);
  return uses_ecc(cfg.kind) ? ecc::encode(bits) : bits;
}

WordId word_from_bits(const HeadConfig& cfg, std::span<const std::uint8_t> data_bits) {
  auto x = bits_to_index(data_bits);
  if (!x) return kUnk;
  const std::uint64_t id = *x + code_offset(cfg);
  if (id >= cfg.vocab_size) return kUnk;
  // Codes of softmax words are unused by the bit part.
  if (is_hybrid(cfg.kind) && in_softmax(cfg, static_cast<WordId>(id))) return kUnk;
  return static_cast<WordId>(id);
}

HeadParams zero_params(const HeadConfig& cfg) {
  cfg.validate();
  const auto rows = layout(cfg).rows();
  return {Matrix(rows, cfg.hidden), std::vector<double>(rows, 0.0)};
}

HeadParams random_params(const HeadConfig& cfg, std::uint64_t seed, double scale) {
  auto p = zero_params(cfg);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dist(-scale, scale);
  for (double& w : p.weight.data()) w = dist(rng);
  for (double& b : p.bias) b = dist(rng);
  return p;
}

std::vector<double> softmax(std::span<const double> logits) {
  std::vector<double> v(logits.size());
  if (logits.empty()) return v;
  const double m = *std::max_element(logits.begin(), logits.end());
  double sum = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) sum += v[i] = std::exp(logits[i] - m);
  for (double& x : v) x /= sum;
  return v;
}

double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

std::vector<double> softmax_forward(const HeadParams& params, std::span<const double> h) {
  check_finite(h);
  return softmax(affine(params.weight, params.bias, h));
}

double softmax_loss(std::span<const double> v, std::size_t target) {
  if (target >= v.size()) throw std::out_of_range("softmax_loss: target index out of range");
  return -std::log(v[target]);
}

std::vector<double> binary_forward(const HeadParams& params, std::span<const double> h) {
  check_finite(h);
  auto q = affine(params.weight, params.bias, h);
  for (double& x : q) x = sigmoid(x);
  return q;
}

double word_probability(std::span<const double> q, std::span<const std::uint8_t> bits) {
  if (q.size() != bits.size()) throw std::invalid_argument("word_probability: length mismatch");
  double p = 1.0;
  for (std::size_t i = 0; i < q.size(); ++i) p *= bits[i] ? q[i] : 1.0 - q[i];
  return p;
}

double log_word_probability(std::span<const double> q, std::span<const std::uint8_t> bits) {
  if (q.size() != bits.size()) throw std::invalid_argument("log_word_probability: length mismatch");
  double lp = 0.0;
  for (std::size_t i = 0; i < q.size(); ++i) lp += bits[i] ? std::log(q[i]) : std::log1p(-q[i]);
  return lp;
}

double bit_loss(std::span<const double> q, std::span<const std::uint8_t> target, BitLoss flavor) {
  if (q.size() != target.size()) throw std::invalid_argument("bit_loss: length mismatch");
  double loss = 0.0;
  for (std::size_t i = 0; i < q.size(); ++i) {
    const double b = target[i] ? 1.0 : 0.0;
    if (flavor == BitLoss::squared) {
      loss += (q[i] - b) * (q[i] - b);
    } else {
      const double c = clamp_prob(q[i]);
      loss -= b * std::log(c) + (1.0 - b) * std::log1p(-c);
    }
  }
  return loss;
}

HeadOutput hybrid_forward(const HeadConfig& cfg, const HeadParams& params, std::span<const double> h) {
  if (!is_hybrid(cfg.kind)) throw std::invalid_argument("hybrid_forward on a non-hybrid head");
  cfg.validate();
  check_finite(h);
  return split_logits(layout(cfg), affine(params.weight, params.bias, h));
}

double hybrid_loss(const HeadConfig& cfg, const HeadOutput& out, WordId w) {
  if (!is_hybrid(cfg.kind)) throw std::invalid_argument("hybrid_loss on a non-hybrid head");
  if (in_softmax(cfg, w)) return cfg.lambda_softmax * softmax_loss(out.probs, w);
  return cfg.lambda_softmax * softmax_loss(out.probs, cfg.softmax_size - 1) +
         cfg.lambda_bits * bit_loss(out.bits, target_bits(cfg, w), cfg.bit_loss);
}

Head::Head(HeadConfig cfg, HeadParams params) : cfg_(cfg), layout_(layout(cfg)), params_(std::move(params)) {
  cfg_.validate();
  if (params_.weight.rows() != layout_.rows() || params_.weight.cols() != cfg_.hidden ||
      params_.bias.size() != layout_.rows())
    throw std::invalid_argument("head parameters do not match the configured shape");
}

HeadOutput Head::activate(std::span<const double> logits) const { return split_logits(layout_, logits); }

HeadOutput Head::forward(std::span<const double> h) const {
  if (h.size() != cfg_.hidden) throw std::invalid_argument("hidden vector has the wrong width");
  check_finite(h);
  return split_logits(layout_, affine(params_.weight, params_.bias, h));
}

double Head::loss(const HeadOutput& out, WordId w) const { return head_loss(cfg_, out, w); }
Prediction Head::predict(std::span<const double> h) const { return head::predict(cfg_, forward(h)); }
Prediction Head::predict(HeadOutput out) const { return head::predict(cfg_, std::move(out)); }
double Head::probability(const HeadOutput& out, WordId w) const { return head::probability(cfg_, out, w); }

HeadOutput activate(const HeadConfig& cfg, std::span<const double> logits) {
  return split_logits(layout(cfg), logits);
}

double head_loss(const HeadConfig& cfg, const HeadOutput& out, WordId w) {
  if (w >= cfg.vocab_size) throw std::invalid_argument("word id out of range");
  switch (cfg.kind) {
    case Kind::softmax: return softmax_loss(out.probs, w);
    case Kind::binary:
    case Kind::binary_ec: return bit_loss(out.bits, target_bits(cfg, w), cfg.bit_loss);
    case Kind::hybrid:
    case Kind::hybrid_ec: return hybrid_loss(cfg, out, w);
  }
  return 0.0;
}

Prediction predict(const HeadConfig& cfg, HeadOutput out) {
  Prediction p;
  double log_prefix = 0.0;
  if (has_softmax(cfg.kind)) {
    const std::size_t best = argmax(out.probs);
    log_prefix = std::log(out.probs[best]);
    if (cfg.kind == Kind::softmax || best + 1 < cfg.softmax_size) {
      p.word = static_cast<WordId>(best);
      p.score = log_prefix;
      p.probs = std::move(out.probs);
      p.bits = std::move(out.bits);
      return p;
    }
  }

  BitArray data;
  double bit_score = 0.0;
  auto clamped = ecc::clamp_probabilities(out.bits);
  if (uses_ecc(cfg.kind)) {
    data = ecc::viterbi_decode(clamped);
    bit_score = ecc::codeword_log_likelihood(clamped, ecc::encode(data));
  } else {
    data.resize(out.bits.size());
    for (std::size_t i = 0; i < data.size(); ++i) data[i] = out.bits[i] >= 0.5;
    bit_score = log_word_probability(clamped, data);
  }
  p.word = word_from_bits(cfg, data);
  p.score = log_prefix + bit_score;
  p.probs = std::move(out.probs);
  p.bits = std::move(out.bits);
  return p;
}

double probability(const HeadConfig& cfg, const HeadOutput& out, WordId w) {
  if (w >= cfg.vocab_size) throw std::invalid_argument("word id out of range");
  if (in_softmax(cfg, w)) return out.probs[w];
  const double pi = word_probability(out.bits, target_bits(cfg, w));
  return is_hybrid(cfg.kind) ? out.probs[cfg.softmax_size - 1] * pi : pi;
}

}  // namespace bitvoc::head
