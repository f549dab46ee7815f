#include <doctest.h>

#include <cmath>
#include <random>
#include <sstream>
#include <stdexcept>

#include "bitvoc/nn.hpp"
#include "gradcheck.hpp"
#include "oracles.hpp"

using namespace bitvoc;
using namespace bitvoc::nn;

namespace {

head::HeadConfig make(head::Kind kind, std::size_t V, std::size_t H, std::size_t N = 0,
                      head::BitLoss flavor = head::BitLoss::squared) {
  head::HeadConfig cfg;
  cfg.kind = kind;
  cfg.vocab_size = V;
  cfg.hidden = H;
  cfg.softmax_size = N;
  cfg.bit_loss = flavor;
  return cfg;
}

std::string serialize(const Network& net) {
  std::ostringstream out;
  const DenseLayer* layers[] = {&net.hidden_layer(), &net.output_layer()};
  save_checkpoint(out, layers);
  return out.str();
}

}  // namespace

TEST_CASE("dense_forward") {
  DenseLayer id(3, 3);
  for (std::size_t i = 0; i < 3; ++i) id.weight(i, i) = 1.0;
  std::vector<double> x{1.5, -2.0, 0.25};
  CHECK(dense_forward(id, x) == x);

  DenseLayer constant(2, 3);
  constant.bias = {4.0, -1.0};
  CHECK(dense_forward(constant, x) == std::vector<double>{4.0, -1.0});

  std::mt19937_64 rng(1);
  auto layer = DenseLayer::random(8, 5, rng, 1.0);
  auto in = gradcheck::random_input(5, rng);
  auto y = dense_forward(layer, in);
  for (std::size_t r = 0; r < 8; ++r) {
    double acc = layer.bias[r];
    for (std::size_t c = 0; c < 5; ++c) acc += layer.weight(r, c) * in[c];
    CHECK(std::abs(y[r] - acc) < 1e-12);
  }
  CHECK_THROWS_AS(dense_forward(layer, std::vector<double>(4, 0.0)), std::invalid_argument);
  CHECK_THROWS_AS(dense_backward(layer, in, std::vector<double>(7, 0.0)), std::invalid_argument);
}

TEST_CASE("layers start with zero moments") {
  std::mt19937_64 rng(2);
  auto layer = DenseLayer::random(4, 3, rng);
  for (double v : layer.m_weight.data()) CHECK(v == 0.0);
  for (double v : layer.v_weight.data()) CHECK(v == 0.0);
  for (double v : layer.m_bias) CHECK(v == 0.0);
  for (double w : layer.weight.data()) CHECK(std::abs(w) <= 0.1);
  CHECK(layer.parameter_count() == 16);
}

TEST_CASE("squared bit loss has zero gradient at the target") {
  auto cfg = make(head::Kind::binary, 64, 2);
  const WordId w = 37;
  auto bits = head::target_bits(cfg, w);
  std::vector<double> logits(bits.size());
  // Saturated logits put q at the target to double precision.
  for (std::size_t i = 0; i < bits.size(); ++i) logits[i] = bits[i] ? 60.0 : -60.0;
  auto lg = head_loss_grad(cfg, logits, w);
  CHECK(lg.loss < 1e-40);
  for (double g : lg.grad) CHECK(std::abs(g) < 1e-20);
}

TEST_CASE("softmax loss gradient is v - e_target") {
  auto cfg = make(head::Kind::softmax, 10, 3);
  std::mt19937_64 rng(3);
  auto z = gradcheck::random_input(10, rng);
  auto lg = head_loss_grad(cfg, z, 4);
  auto v = head::softmax(z);
  for (std::size_t i = 0; i < 10; ++i) CHECK(std::abs(lg.grad[i] - (v[i] - (i == 4))) < 1e-15);
  CHECK(lg.loss == doctest::Approx(head::softmax_loss(v, 4)).epsilon(1e-12));

  // Propagated through the affine map: dL/dW = (v - e) x^T.
  DenseLayer layer = DenseLayer::random(10, 3, rng, 1.0);
  auto x = gradcheck::random_input(3, rng);
  auto logits = dense_forward(layer, x);
  auto g = head_loss_grad(cfg, logits, 7);
  dense_backward(layer, x, g.grad);
  auto p = head::softmax(logits);
  for (std::size_t r = 0; r < 10; ++r)
    for (std::size_t c = 0; c < 3; ++c) CHECK(std::abs(layer.grad_weight(r, c) - (p[r] - (r == 7)) * x[c]) < 1e-15);
}

TEST_CASE("head_loss_grad agrees with the head losses") {
  std::mt19937_64 rng(4);
  for (head::BitLoss flavor : {head::BitLoss::squared, head::BitLoss::cross_entropy}) {
    for (auto cfg : {make(head::Kind::softmax, 30, 2), make(head::Kind::binary, 30, 2, 0, flavor),
                     make(head::Kind::binary_ec, 30, 2, 0, flavor), make(head::Kind::hybrid, 30, 2, 6, flavor),
                     make(head::Kind::hybrid_ec, 30, 2, 6, flavor)}) {
      for (int t = 0; t < 10; ++t) {
        auto z = gradcheck::random_input(head::layout(cfg).rows(), rng);
        const auto w = static_cast<WordId>(rng() % 30);
        CHECK(head_loss_grad(cfg, z, w).loss ==
              doctest::Approx(head::head_loss(cfg, head::activate(cfg, z), w)).epsilon(1e-10));
      }
    }
  }
}

TEST_CASE("gradients match finite differences for every head and flavor") {
  std::mt19937_64 rng(5);
  for (head::BitLoss flavor : {head::BitLoss::squared, head::BitLoss::cross_entropy}) {
    for (auto cfg : {make(head::Kind::softmax, 12, 5), make(head::Kind::binary, 40, 5, 0, flavor),
                     make(head::Kind::binary_ec, 40, 5, 0, flavor), make(head::Kind::hybrid, 40, 5, 8, flavor),
                     make(head::Kind::hybrid_ec, 40, 5, 8, flavor)}) {
      cfg.lambda_softmax = 0.7;
      cfg.lambda_bits = 1.3;
      for (WordId target : {WordId{2}, WordId{5}, WordId{31}}) {
        Network net(cfg, 4, rng(), 0.5);
        auto r = gradcheck::check_network(net, gradcheck::random_input(4, rng), target % cfg.vocab_size);
        INFO(head::kind_name(cfg) << " target " << target);
        CHECK(r.checked > 0);
        CHECK(r.max_relative_error < 1e-4);
      }
    }
  }
}

TEST_CASE("backward requires a forward pass") {
  Network net(make(head::Kind::binary, 20, 3), 2, 1);
  CHECK_THROWS_AS(net.backward(), std::logic_error);
  std::vector<double> x{0.1, 0.2};
  net.forward(x, 5);
  CHECK_NOTHROW(net.backward());
  CHECK_THROWS_AS(net.backward(), std::logic_error);
}

TEST_CASE("Adam leaves parameters alone under a zero gradient") {
  std::mt19937_64 rng(6);
  auto layer = DenseLayer::random(3, 4, rng);
  const auto before = std::vector<double>(layer.weight.data().begin(), layer.weight.data().end());
  const auto bias = layer.bias;
  Adam opt;
  for (int i = 0; i < 5; ++i) opt.step(layer);
  CHECK(std::equal(before.begin(), before.end(), layer.weight.data().begin()));
  CHECK(layer.bias == bias);
  CHECK(opt.steps() == 5);
}

TEST_CASE("first Adam step has magnitude alpha") {
  for (double g : {1e-3, 0.5, 1.0, 250.0, -7.0}) {
    DenseLayer layer(1, 1);
    layer.grad_weight(0, 0) = g;
    layer.grad_bias[0] = g;
    Adam opt;
    opt.step(layer);
    CHECK(std::abs(layer.weight(0, 0)) == doctest::Approx(0.001).epsilon(1e-4));
    CHECK(layer.weight(0, 0) * g < 0.0);
  }
  AdamConfig defaults;
  CHECK(defaults.alpha == 0.001);
  CHECK(defaults.beta1 == 0.9);
  CHECK(defaults.beta2 == 0.999);
  CHECK(defaults.epsilon == 1e-8);
}

TEST_CASE("Adam minimizes a quadratic bowl") {
  // f(p) = sum c_i (p_i - a_i)^2, minimum 0.
  const std::vector<double> a{0.8, -0.5, 0.3, -0.9, 0.1};
  const std::vector<double> c{1.0, 3.0, 0.5, 2.0, 10.0};
  DenseLayer layer(5, 1);
  Adam opt;
  auto f = [&] {
    double s = 0.0;
    for (std::size_t i = 0; i < 5; ++i) s += c[i] * (layer.weight(i, 0) - a[i]) * (layer.weight(i, 0) - a[i]);
    return s;
  };
  int steps = 0;
  for (; steps < 2000 && f() > 1e-3; ++steps) {
    for (std::size_t i = 0; i < 5; ++i) layer.grad_weight(i, 0) = 2.0 * c[i] * (layer.weight(i, 0) - a[i]);
    opt.step(layer);
  }
  MESSAGE("quadratic bowl reached f <= 1e-3 after " << steps << " steps");
  CHECK(f() <= 1e-3);
  CHECK(steps <= 2000);
}

TEST_CASE("moving averages of the loss do not increase on a convex problem") {
  // Softmax regression: a single affine layer trained full batch is convex.
  auto cfg = make(head::Kind::softmax, 6, 1);
  std::mt19937_64 rng(7);
  std::vector<std::vector<double>> xs;
  std::vector<WordId> ys;
  for (int i = 0; i < 60; ++i) {
    xs.push_back(gradcheck::random_input(4, rng));
    ys.push_back(static_cast<WordId>(rng() % 6));
  }
  DenseLayer layer = DenseLayer::random(6, 4, rng);
  Adam opt;
  std::vector<double> losses;
  for (int step = 0; step < 400; ++step) {
    layer.zero_grad();
    double total = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
      auto lg = head_loss_grad(cfg, dense_forward(layer, xs[i]), ys[i]);
      for (double& g : lg.grad) g /= static_cast<double>(xs.size());
      dense_backward(layer, xs[i], lg.grad);
      total += lg.loss;
    }
    losses.push_back(total / static_cast<double>(xs.size()));
    opt.step(layer);
  }
  for (std::size_t s = 10; s + 10 <= losses.size(); s += 10) {
    double prev = 0.0, cur = 0.0;
    for (std::size_t j = 0; j < 10; ++j) {
      prev += losses[s - 10 + j];
      cur += losses[s + j];
    }
    CHECK(cur <= prev + 1e-12);
  }
  CHECK(losses.back() < losses.front());
}

TEST_CASE("fixed seeds give bit-identical trajectories") {
  auto cfg = make(head::Kind::hybrid_ec, 50, 6, 8);
  std::mt19937_64 data_rng(8);
  std::vector<Example> batch;
  for (int i = 0; i < 16; ++i) batch.push_back({gradcheck::random_input(3, data_rng), static_cast<WordId>(i * 3 % 50)});

  auto run = [&] {
    Network net(cfg, 3, 42);
    Adam opt;
    std::vector<double> losses;
    for (int s = 0; s < 20; ++s) losses.push_back(train_batch(net, opt, batch));
    return std::make_pair(losses, serialize(net));
  };
  auto a = run();
  auto b = run();
  CHECK(a.first == b.first);
  CHECK(a.second == b.second);
  CHECK(serialize(Network(cfg, 3, 42)) != serialize(Network(cfg, 3, 43)));
}

TEST_CASE("train_batch uses the mean gradient") {
  auto cfg = make(head::Kind::softmax, 5, 3);
  std::mt19937_64 rng(9);
  Example ex{gradcheck::random_input(2, rng), 3};
  std::vector<Example> single{ex}, doubled{ex, ex};
  Network a(cfg, 2, 1), b(cfg, 2, 1);
  Adam oa, ob;
  CHECK(train_batch(a, oa, single) == doctest::Approx(train_batch(b, ob, doubled)).epsilon(1e-15));
  CHECK(serialize(a) == serialize(b));
  CHECK_THROWS_AS(train_batch(a, oa, std::vector<Example>{}), std::invalid_argument);
}

TEST_CASE("checkpoint roundtrip") {
  auto cfg = make(head::Kind::hybrid, 30, 4, 5);
  Network net(cfg, 3, 11);
  const std::string bytes = serialize(net);
  CHECK(bytes.substr(0, 4) == "BVCK");
  CHECK(bytes.size() == 4 + 4 + 4 + 2 * 16 + 8 * (net.hidden_layer().parameter_count() + net.output_layer().parameter_count()));

  std::istringstream in(bytes);
  auto layers = load_checkpoint(in);
  REQUIRE(layers.size() == 2);
  CHECK(layers[0].outputs() == 4);
  CHECK(layers[0].inputs() == 3);
  CHECK(layers[1].outputs() == head::layout(cfg).rows());
  for (std::size_t i = 0; i < layers[1].weight.size(); ++i)
    CHECK(layers[1].weight.data()[i] == net.output_layer().weight.data()[i]);
  CHECK(layers[1].bias == net.output_layer().bias);
}

TEST_CASE("malformed checkpoints are rejected") {
  Network net(make(head::Kind::binary, 30, 4), 3, 11);
  const std::string bytes = serialize(net);

  std::istringstream empty("");
  CHECK_THROWS_AS(load_checkpoint(empty), std::runtime_error);
  std::istringstream magic("XXXX" + bytes.substr(4));
  CHECK_THROWS_AS(load_checkpoint(magic), std::runtime_error);
  std::string versioned = bytes;
  versioned[4] = 2;
  std::istringstream version(versioned);
  CHECK_THROWS_AS(load_checkpoint(version), std::runtime_error);
  std::istringstream truncated(bytes.substr(0, bytes.size() - 3));
  CHECK_THROWS_AS(load_checkpoint(truncated), std::runtime_error);
  std::string zero_rows = bytes;
  for (int i = 12; i < 20; ++i) zero_rows[i] = 0;
  std::istringstream shape(zero_rows);
  CHECK_THROWS_AS(load_checkpoint(shape), std::runtime_error);
}
