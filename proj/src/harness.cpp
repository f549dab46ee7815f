#include "bitvoc/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>

#include "bitvoc/parallel.hpp"

namespace bitvoc::harness {

namespace {

using Clock = std::chrono::steady_clock;

std::vector<nn::Example> sample(const ZipfTask& task, const std::vector<std::vector<double>>& centroids,
                                std::discrete_distribution<std::size_t>& classes, std::size_t count,
                                double noise, std::mt19937_64& rng) {
  std::normal_distribution<double> gauss(0.0, task.spread);
  std::bernoulli_distribution flip(noise);
  std::uniform_int_distribution<std::size_t> any_word(kNumMarkers, task.vocab_size - 1);
  std::vector<nn::Example> out(count);
  for (auto& ex : out) {
    const auto id = classes(rng);
    ex.features.resize(task.features);
    for (std::size_t d = 0; d < task.features; ++d) ex.features[d] = centroids[id][d] + gauss(rng);
    ex.label = static_cast<WordId>(noise > 0.0 && flip(rng) ? any_word(rng) : id);
  }
  return out;
}

struct Accuracy {
  double overall = 0.0, frequent = 0.0, rare = 0.0;
};

Accuracy evaluate(const nn::Network& net, std::span<const nn::Example> test, std::size_t cutoff) {
  std::size_t hits = 0, freq_n = 0, freq_hits = 0, rare_n = 0, rare_hits = 0;
  for (const auto& ex : test) {
    const bool hit = net.predict(ex.features).word == ex.label;
    hits += hit;
    if (ex.label < cutoff) {
      ++freq_n;
      freq_hits += hit;
    } else {
      ++rare_n;
      rare_hits += hit;
    }
  }
  auto ratio = [](std::size_t a, std::size_t b) { return b ? static_cast<double>(a) / b : 0.0; };
  return {ratio(hits, test.size()), ratio(freq_hits, freq_n), ratio(rare_hits, rare_n)};
}

RunMetrics train_one(const Dataset& data, std::size_t vocab_size, const std::string& name,
                     const TrainConfig& config, std::uint64_t seed, const EpochCallback& on_epoch,
                     const TrainedCallback& on_trained) {
  head::HeadConfig cfg;
  parse_kind(name, cfg);
  cfg.vocab_size = vocab_size;
  cfg.hidden = config.hidden;
  cfg.bit_loss = config.bit_loss;
  cfg.validate();

  const std::size_t features = data.train.front().features.size();
  nn::Network net(cfg, features, seed, config.init_scale);
  nn::Adam opt(config.adam);
  const std::size_t cutoff = config.frequent_cutoff ? config.frequent_cutoff : vocab_size / 4;

  RunMetrics m;
  m.head = name;
  const auto pc = head::param_count(cfg);
  m.output_rows = pc.rows;
  m.head_params = net.output_layer().parameter_count();
  if (m.head_params != pc.params) throw std::logic_error("head parameter count disagrees with param_count");

  std::vector<std::size_t> order(data.train.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 shuffle_rng(seed ^ 0x9E3779B97F4A7C15ULL);
  std::vector<nn::Example> batch;
  double best = -1.0;

  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    double loss_sum = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      batch.clear();
      for (std::size_t i = start; i < std::min(order.size(), start + config.batch_size); ++i)
        batch.push_back(data.train[order[i]]);
      loss_sum += nn::train_batch(net, opt, batch);
      ++batches;
    }
    EpochRecord rec;
    rec.head = name;
    rec.epoch = epoch;
    rec.train_loss = loss_sum / static_cast<double>(batches);
    if (!std::isfinite(rec.train_loss)) {
      m.diverged = true;
      m.epochs.push_back(rec);
      if (on_epoch) on_epoch(rec);
      break;
    }
    const auto t0 = Clock::now();
    const auto acc = evaluate(net, data.test, cutoff);
    const auto t1 = Clock::now();
    rec.accuracy = acc.overall;
    rec.frequent_accuracy = acc.frequent;
    rec.rare_accuracy = acc.rare;
    m.epochs.push_back(rec);
    if (on_epoch) on_epoch(rec);
    if (acc.overall > best) {
      best = acc.overall;
      m.accuracy = acc.overall;
      m.frequent_accuracy = acc.frequent;
      m.rare_accuracy = acc.rare;
      m.predict_ns = std::chrono::duration<double, std::nano>(t1 - t0).count() /
                     static_cast<double>(std::max<std::size_t>(1, data.test.size()));
    }
  }
  if (on_trained) on_trained(name, net);
  return m;
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace

void ZipfTask::validate() const {
  if (vocab_size < 8) throw std::invalid_argument("Zipf task needs V >= 8");
  if (features < 2) throw std::invalid_argument("Zipf task needs at least 2 features");
  if (!(exponent >= 0.0)) throw std::invalid_argument("Zipf exponent must be nonnegative");
  if (!(spread > 0.0)) throw std::invalid_argument("cluster spread must be positive");
  if (!(label_noise >= 0.0 && label_noise <= 1.0)) throw std::invalid_argument("label noise must be in [0, 1]");
  if (train_size == 0 || test_size == 0) throw std::invalid_argument("train and test sizes must be positive");
}

Dataset generate_task(const ZipfTask& task, std::uint64_t seed) {
  task.validate();
  Dataset data;
  data.prior.assign(task.vocab_size, 0.0);
  for (std::size_t id = kNumMarkers; id < task.vocab_size; ++id)
    data.prior[id] = std::pow(static_cast<double>(id - kNumMarkers + 1), -task.exponent);
  const double total = std::accumulate(data.prior.begin(), data.prior.end(), 0.0);
  for (double& p : data.prior) p /= total;

  std::mt19937_64 centroid_rng(seed);
  std::normal_distribution<double> unit(0.0, 1.0);
  std::vector<std::vector<double>> centroids(task.vocab_size, std::vector<double>(task.features));
  for (auto& c : centroids)
    for (double& x : c) x = unit(centroid_rng);

  std::discrete_distribution<std::size_t> classes(data.prior.begin(), data.prior.end());
  std::mt19937_64 train_rng(seed * 2 + 1);
  std::mt19937_64 test_rng(seed * 2 + 2);
  data.train = sample(task, centroids, classes, task.train_size, task.label_noise, train_rng);
  data.test = sample(task, centroids, classes, task.test_size, 0.0, test_rng);
  return data;
}

double rank_frequency_slope(std::span<const nn::Example> examples, std::size_t vocab_size) {
  std::vector<std::size_t> counts(vocab_size, 0);
  for (const auto& ex : examples) ++counts.at(ex.label);
  std::vector<double> xs, ys;
  for (std::size_t id = kNumMarkers; id < vocab_size; ++id) {
    if (!counts[id]) continue;
    xs.push_back(std::log(static_cast<double>(id - kNumMarkers + 1)));
    ys.push_back(std::log(static_cast<double>(counts[id])));
  }
  if (xs.size() < 2) throw std::invalid_argument("need at least two observed classes");
  const double n = static_cast<double>(xs.size());
  const double mx = std::accumulate(xs.begin(), xs.end(), 0.0) / n;
  const double my = std::accumulate(ys.begin(), ys.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxy += (xs[i] - mx) * (ys[i] - my);
    sxx += (xs[i] - mx) * (xs[i] - mx);
  }
  return sxy / sxx;
}

double majority_baseline(const Dataset& data) {
  const auto best = static_cast<WordId>(std::max_element(data.prior.begin(), data.prior.end()) - data.prior.begin());
  const auto hits = std::count_if(data.test.begin(), data.test.end(), [&](const auto& ex) { return ex.label == best; });
  return static_cast<double>(hits) / static_cast<double>(data.test.size());
}

std::vector<RunMetrics> run_experiment(const Dataset& data, std::size_t vocab_size,
                                       std::span<const std::string> heads, const TrainConfig& config,
                                       std::uint64_t seed, const EpochCallback& on_epoch,
                                       const TrainedCallback& on_trained) {
  if (data.train.empty() || data.test.empty()) throw std::invalid_argument("empty dataset");
  if (config.epochs == 0 || config.batch_size == 0) throw std::invalid_argument("epochs and batch size must be positive");
  std::vector<RunMetrics> results(heads.size());
  parallel_for(heads.size(), [&](std::size_t i) {
    results[i] = train_one(data, vocab_size, heads[i], config, seed, {}, on_trained);
  });
  if (on_epoch)
    for (const auto& r : results)
      for (const auto& e : r.epochs) on_epoch(e);
  return results;
}

std::vector<BenchRow> bench_heads(std::span<const std::size_t> vocab_sizes, std::span<const std::string> heads,
                                  const BenchConfig& config) {
  if (config.trials == 0 || config.batch == 0) throw std::invalid_argument("bench needs trials and batch > 0");
  std::vector<BenchRow> rows;
  std::mt19937_64 rng(config.seed);
  std::normal_distribution<double> unit(0.0, 1.0);
  std::vector<std::vector<double>> hidden(config.batch, std::vector<double>(config.hidden));
  for (auto& h : hidden)
    for (double& x : h) x = unit(rng);

  for (std::size_t V : vocab_sizes) {
    for (const auto& name : heads) {
      head::HeadConfig cfg;
      parse_kind(name, cfg);
      cfg.vocab_size = V;
      cfg.hidden = config.hidden;
      const head::Head model(cfg, head::random_params(cfg, config.seed));
      volatile WordId sink = 0;
      auto run_batch = [&] {
        for (const auto& h : hidden) sink = sink + model.predict(h).word;
      };
      for (std::size_t i = 0; i < config.warmup; ++i) run_batch();
      std::vector<double> samples;
      samples.reserve(config.trials);
      for (std::size_t i = 0; i < config.trials; ++i) {
        const auto t0 = Clock::now();
        run_batch();
        const auto t1 = Clock::now();
        samples.push_back(std::chrono::duration<double, std::nano>(t1 - t0).count() /
                          static_cast<double>(config.batch));
      }
      const auto pc = head::param_count(cfg);
      rows.push_back({name, V, pc.rows, pc.params, median(std::move(samples))});
    }
  }
  return rows;
}

}  // namespace bitvoc::harness
