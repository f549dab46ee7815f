#pragma once

// Small differentiable core: dense layers with manual backward passes, the
// head losses as functions of logits, Adam, and a one-hidden-layer network
// used by the synthetic experiments.

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <random>
#include <span>
#include <vector>

#include "bitvoc/head.hpp"
#include "bitvoc/linalg.hpp"

namespace bitvoc::nn {

struct DenseLayer {
  Matrix weight;  // out x in
  std::vector<double> bias;
  Matrix grad_weight;
  std::vector<double> grad_bias;
  // Adam moments
  Matrix m_weight, v_weight;
  std::vector<double> m_bias, v_bias;

  DenseLayer() = default;
  DenseLayer(std::size_t out, std::size_t in);

  // Uniform in [-scale, scale].
  static DenseLayer random(std::size_t out, std::size_t in, std::mt19937_64& rng, double scale = 0.1);

  std::size_t inputs() const { return weight.cols(); }
  std::size_t outputs() const { return weight.rows(); }
  std::size_t parameter_count() const { return weight.size() + bias.size(); }

  void zero_grad();
};

std::vector<double> dense_forward(const DenseLayer& layer, std::span<const double> x);

// Accumulates grad_weight += upstream x^T, grad_bias += upstream; returns
// W^T upstream.
std::vector<double> dense_backward(DenseLayer& layer, std::span<const double> x, std::span<const double> upstream);

struct LossGrad {
  double loss = 0.0;
  std::vector<double> grad;  // d loss / d logits
};

// Head loss as a function of the head's logits. Cross-entropy bit loss is
// evaluated in log-sigmoid form so it stays exact where the probability form
// would saturate.
LossGrad head_loss_grad(const head::HeadConfig& cfg, std::span<const double> logits, WordId target);

struct AdamConfig {
  double alpha = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

class Adam {
 public:
  explicit Adam(AdamConfig cfg = {}) : cfg_(cfg) {}

  // One bias-corrected update of every layer from its accumulated gradients.
  void step(std::span<DenseLayer* const> layers);
  void step(DenseLayer& layer);

  std::uint64_t steps() const { return t_; }
  const AdamConfig& config() const { return cfg_; }

 private:
  AdamConfig cfg_;
  std::uint64_t t_ = 0;
};

// features -> tanh(dense) -> head dense -> head activation
class Network {
 public:
  Network(head::HeadConfig cfg, std::size_t input_dim, std::uint64_t seed, double init_scale = 0.1);

  const head::HeadConfig& config() const { return cfg_; }
  DenseLayer& hidden_layer() { return hidden_; }
  DenseLayer& output_layer() { return output_; }
  const DenseLayer& hidden_layer() const { return hidden_; }
  const DenseLayer& output_layer() const { return output_; }
  std::size_t input_dim() const { return hidden_.inputs(); }

  // Runs the forward pass and caches what backward needs. Returns the loss.
  double forward(std::span<const double> x, WordId target);
  // Accumulates gradients of upstream * loss. Throws std::logic_error if no
  // forward pass is cached. Consumes the cache.
  void backward(double upstream = 1.0);
  // d loss / d x from the most recent backward.
  std::span<const double> input_grad() const { return input_grad_; }

  head::HeadOutput evaluate(std::span<const double> x) const;
  head::Prediction predict(std::span<const double> x) const;

  void zero_grad();
  std::vector<DenseLayer*> layers() { return {&hidden_, &output_}; }

 private:
  struct Cache {
    std::vector<double> input;
    std::vector<double> hidden;  // post-tanh
    std::vector<double> logits;
    WordId target = 0;
  };

  head::HeadConfig cfg_;
  DenseLayer hidden_;
  DenseLayer output_;
  std::optional<Cache> cache_;
  std::vector<double> input_grad_;
};

struct Example {
  std::vector<double> features;
  WordId label = 0;
};

// Mean loss over the batch; the gradient is the batch mean. One Adam step.
double train_batch(Network& net, Adam& opt, std::span<const Example> batch);

// Versioned little-endian checkpoint:
//   "BVCK" | u32 version | u32 layer count | per layer: u64 rows, u64 cols
//   then per layer: weight (row-major f64) followed by bias (f64).
inline constexpr std::uint32_t kCheckpointVersion = 1;
void save_checkpoint(std::ostream& out, std::span<const DenseLayer* const> layers);
// Throws std::runtime_error on a malformed stream.
std::vector<DenseLayer> load_checkpoint(std::istream& in);

}  // namespace bitvoc::nn
