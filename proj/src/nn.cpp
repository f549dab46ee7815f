#include "bitvoc/nn.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstring>
#include <istream>
#include <ostream>
#include <stdexcept>

namespace bitvoc::nn {

namespace {

double softplus(double z) { return std::max(z, 0.0) + std::log1p(std::exp(-std::abs(z))); }

// Softmax cross-entropy of logits z at `target`, scaled by `weight`, with the
// gradient written into grad.
double softmax_xent(std::span<const double> z, std::size_t target, double weight, std::span<double> grad) {
  const auto v = head::softmax(z);
  const double m = *std::max_element(z.begin(), z.end());
  double sum = 0.0;
  for (double x : z) sum += std::exp(x - m);
  for (std::size_t i = 0; i < z.size(); ++i) grad[i] = weight * (v[i] - (i == target ? 1.0 : 0.0));
  return weight * (m + std::log(sum) - z[target]);
}

double bit_xent(std::span<const double> z, std::span<const std::uint8_t> bits, head::BitLoss flavor, double weight,
                std::span<double> grad) {
  double loss = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) {
    const double b = bits[i] ? 1.0 : 0.0;
    const double q = head::sigmoid(z[i]);
    if (flavor == head::BitLoss::squared) {
      loss += (q - b) * (q - b);
      grad[i] = weight * 2.0 * (q - b) * q * (1.0 - q);
    } else {
      loss += b * softplus(-z[i]) + (1.0 - b) * softplus(z[i]);
      grad[i] = weight * (q - b);
    }
  }
  return weight * loss;
}

template <typename T>
void write_le(std::ostream& out, T value) {
  auto bytes = std::bit_cast<std::array<char, sizeof(T)>>(value);
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes.begin(), bytes.end());
  out.write(bytes.data(), bytes.size());
}

template <typename T>
T read_le(std::istream& in) {
  std::array<char, sizeof(T)> bytes;
  if (!in.read(bytes.data(), bytes.size())) throw std::runtime_error("checkpoint truncated");
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes.begin(), bytes.end());
  return std::bit_cast<T>(bytes);
}

}  // namespace

DenseLayer::DenseLayer(std::size_t out, std::size_t in)
    : weight(out, in),
      bias(out, 0.0),
      grad_weight(out, in),
      grad_bias(out, 0.0),
      m_weight(out, in),
      v_weight(out, in),
      m_bias(out, 0.0),
      v_bias(out, 0.0) {}

DenseLayer DenseLayer::random(std::size_t out, std::size_t in, std::mt19937_64& rng, double scale) {
  DenseLayer layer(out, in);
  std::uniform_real_distribution<double> dist(-scale, scale);
  for (double& w : layer.weight.data()) w = dist(rng);
  for (double& b : layer.bias) b = dist(rng);
  return layer;
}

void DenseLayer::zero_grad() {
  std::fill(grad_weight.data().begin(), grad_weight.data().end(), 0.0);
  std::fill(grad_bias.begin(), grad_bias.end(), 0.0);
}

std::vector<double> dense_forward(const DenseLayer& layer, std::span<const double> x) {
  return affine(layer.weight, layer.bias, x);
}

std::vector<double> dense_backward(DenseLayer& layer, std::span<const double> x, std::span<const double> upstream) {
  if (x.size() != layer.inputs() || upstream.size() != layer.outputs())
    throw std::invalid_argument("dense_backward: dimension mismatch");
  std::vector<double> dx(layer.inputs(), 0.0);
  for (std::size_t r = 0; r < layer.outputs(); ++r) {
    const double g = upstream[r];
    if (g == 0.0) continue;
    layer.grad_bias[r] += g;
    auto gw = layer.grad_weight.row(r);
    auto w = layer.weight.row(r);
    for (std::size_t c = 0; c < x.size(); ++c) {
      gw[c] += g * x[c];
      dx[c] += g * w[c];
    }
  }
  return dx;
}

LossGrad head_loss_grad(const head::HeadConfig& cfg, std::span<const double> logits, WordId target) {
  const auto geom = head::layout(cfg);
  if (logits.size() != geom.rows()) throw std::invalid_argument("head_loss_grad: logit count mismatch");
  if (target >= cfg.vocab_size) throw std::invalid_argument("head_loss_grad: target out of range");

  LossGrad out;
  out.grad.assign(logits.size(), 0.0);
  auto soft_z = logits.first(geom.softmax_rows);
  auto bit_z = logits.subspan(geom.softmax_rows);
  auto soft_g = std::span<double>(out.grad).first(geom.softmax_rows);
  auto bit_g = std::span<double>(out.grad).subspan(geom.softmax_rows);

  switch (cfg.kind) {
    case head::Kind::softmax:
      out.loss = softmax_xent(soft_z, target, 1.0, soft_g);
      break;
    case head::Kind::binary:
    case head::Kind::binary_ec:
      out.loss = bit_xent(bit_z, head::target_bits(cfg, target), cfg.bit_loss, 1.0, bit_g);
      break;
    case head::Kind::hybrid:
    case head::Kind::hybrid_ec:
      out.loss = softmax_xent(soft_z, head::softmax_slot(cfg, target), cfg.lambda_softmax, soft_g);
      if (!head::in_softmax(cfg, target))
        out.loss += bit_xent(bit_z, head::target_bits(cfg, target), cfg.bit_loss, cfg.lambda_bits, bit_g);
      break;
  }
  return out;
}

void Adam::step(std::span<DenseLayer* const> layers) {
  ++t_;
  const double correction1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double correction2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  auto update = [&](std::span<double> p, std::span<const double> g, std::span<double> m, std::span<double> v) {
    for (std::size_t i = 0; i < p.size(); ++i) {
      m[i] = cfg_.beta1 * m[i] + (1.0 - cfg_.beta1) * g[i];
      v[i] = cfg_.beta2 * v[i] + (1.0 - cfg_.beta2) * g[i] * g[i];
      const double m_hat = m[i] / correction1;
      const double v_hat = v[i] / correction2;
      p[i] -= cfg_.alpha * m_hat / (std::sqrt(v_hat) + cfg_.epsilon);
    }
  };
  for (DenseLayer* layer : layers) {
    update(layer->weight.data(), layer->grad_weight.data(), layer->m_weight.data(), layer->v_weight.data());
    update(layer->bias, layer->grad_bias, layer->m_bias, layer->v_bias);
  }
}

void Adam::step(DenseLayer& layer) {
  DenseLayer* one[] = {&layer};
  step(one);
}

Network::Network(head::HeadConfig cfg, std::size_t input_dim, std::uint64_t seed, double init_scale) : cfg_(cfg) {
  cfg_.validate();
  if (input_dim == 0) throw std::invalid_argument("network input dimension must be positive");
  std::mt19937_64 rng(seed);
  hidden_ = DenseLayer::random(cfg_.hidden, input_dim, rng, init_scale);
  output_ = DenseLayer::random(head::layout(cfg_).rows(), cfg_.hidden, rng, init_scale);
}

double Network::forward(std::span<const double> x, WordId target) {
  Cache c;
  c.input.assign(x.begin(), x.end());
  c.hidden = dense_forward(hidden_, x);
  for (double& a : c.hidden) a = std::tanh(a);
  c.logits = dense_forward(output_, c.hidden);
  c.target = target;
  const double loss = head_loss_grad(cfg_, c.logits, target).loss;
  cache_ = std::move(c);
  return loss;
}

void Network::backward(double upstream) {
  if (!cache_) throw std::logic_error("backward called before forward");
  Cache c = std::move(*cache_);
  cache_.reset();
  auto lg = head_loss_grad(cfg_, c.logits, c.target);
  for (double& g : lg.grad) g *= upstream;
  auto dh = dense_backward(output_, c.hidden, lg.grad);
  for (std::size_t i = 0; i < dh.size(); ++i) dh[i] *= 1.0 - c.hidden[i] * c.hidden[i];
  input_grad_ = dense_backward(hidden_, c.input, dh);
}

head::HeadOutput Network::evaluate(std::span<const double> x) const {
  auto h = dense_forward(hidden_, x);
  for (double& a : h) a = std::tanh(a);
  return head::activate(cfg_, dense_forward(output_, h));
}

head::Prediction Network::predict(std::span<const double> x) const { return head::predict(cfg_, evaluate(x)); }

void Network::zero_grad() {
  hidden_.zero_grad();
  output_.zero_grad();
}

double train_batch(Network& net, Adam& opt, std::span<const Example> batch) {
  if (batch.empty()) throw std::invalid_argument("train_batch: empty batch");
  net.zero_grad();
  const double scale = 1.0 / static_cast<double>(batch.size());
  double total = 0.0;
  for (const auto& ex : batch) {
    total += net.forward(ex.features, ex.label);
    net.backward(scale);
  }
  opt.step(net.layers());
  return total * scale;
}

void save_checkpoint(std::ostream& out, std::span<const DenseLayer* const> layers) {
  out.write("BVCK", 4);
  write_le<std::uint32_t>(out, kCheckpointVersion);
  write_le<std::uint32_t>(out, static_cast<std::uint32_t>(layers.size()));
  for (const DenseLayer* l : layers) {
    write_le<std::uint64_t>(out, l->outputs());
    write_le<std::uint64_t>(out, l->inputs());
  }
  for (const DenseLayer* l : layers) {
    for (double w : l->weight.data()) write_le(out, w);
    for (double b : l->bias) write_le(out, b);
  }
  if (!out) throw std::runtime_error("failed writing checkpoint");
}

std::vector<DenseLayer> load_checkpoint(std::istream& in) {
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, "BVCK", 4) != 0) throw std::runtime_error("not a checkpoint file");
  const auto version = read_le<std::uint32_t>(in);
  if (version != kCheckpointVersion) throw std::runtime_error("unsupported checkpoint version " + std::to_string(version));
  const auto count = read_le<std::uint32_t>(in);
  std::vector<std::pair<std::uint64_t, std::uint64_t>> shapes(count);
  for (auto& [rows, cols] : shapes) {
    rows = read_le<std::uint64_t>(in);
    cols = read_le<std::uint64_t>(in);
    if (rows == 0 || cols == 0 || rows > (1U << 24) || cols > (1U << 24))
      throw std::runtime_error("checkpoint has an implausible layer shape");
  }
  std::vector<DenseLayer> layers;
  for (auto [rows, cols] : shapes) {
    DenseLayer l(rows, cols);
    for (double& w : l.weight.data()) w = read_le<double>(in);
    for (double& b : l.bias) b = read_le<double>(in);
    layers.push_back(std::move(l));
  }
  return layers;
}

}  // namespace bitvoc::nn
