#pragma once

// Synthetic Zipfian classification tasks and output-layer timing.
//
// Each non-marker word id is a class with prior proportional to
// 1 / rank^s (rank = id - 2). Features are one Gaussian cluster per class.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "bitvoc/head.hpp"
#include "bitvoc/nn.hpp"

namespace bitvoc::harness {

struct ZipfTask {
  std::size_t vocab_size = 256;  // V, markers included
  double exponent = 1.0;         // s
  std::size_t features = 16;     // F
  double spread = 0.5;           // per-dimension std-dev around a class centroid
  double label_noise = 0.0;      // fraction of training labels replaced by a random class
  std::size_t train_size = 10000;
  std::size_t test_size = 2000;

  void validate() const;
};

struct Dataset {
  std::vector<nn::Example> train;
  std::vector<nn::Example> test;
  std::vector<double> prior;  // indexed by word id, zero for markers
};

// Deterministic in (task, seed). Train and test draw from separate streams.
Dataset generate_task(const ZipfTask& task, std::uint64_t seed);

// Least-squares slope of log(count) against log(rank) over classes with a
// nonzero count.
double rank_frequency_slope(std::span<const nn::Example> examples, std::size_t vocab_size);

// Accuracy of always predicting the most probable class.
double majority_baseline(const Dataset& data);

struct TrainConfig {
  std::size_t hidden = 64;
  std::size_t epochs = 5;
  std::size_t batch_size = 32;
  nn::AdamConfig adam{};
  head::BitLoss bit_loss = head::BitLoss::squared;
  double init_scale = 0.1;
  // Words with id below this count as frequent in the accuracy breakdown;
  // 0 selects V / 4.
  std::size_t frequent_cutoff = 0;
};

struct EpochRecord {
  std::string head;
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double accuracy = 0.0;
  double frequent_accuracy = 0.0;
  double rare_accuracy = 0.0;
};

struct RunMetrics {
  std::string head;
  std::size_t output_rows = 0;
  std::size_t head_params = 0;
  bool diverged = false;
  std::vector<EpochRecord> epochs;
  // Figures of the epoch with the best test accuracy.
  double accuracy = 0.0;
  double frequent_accuracy = 0.0;
  double rare_accuracy = 0.0;
  double predict_ns = 0.0;  // mean wall-clock per test example
};

using EpochCallback = std::function<void(const EpochRecord&)>;
// Called once per head with the final network, possibly from a worker thread.
using TrainedCallback = std::function<void(const std::string& head, const nn::Network&)>;

// Trains one network per head name (see head::parse_kind) on the same data
// and seed. Heads may run in parallel; results keep the input order.
std::vector<RunMetrics> run_experiment(const Dataset& data, std::size_t vocab_size,
                                       std::span<const std::string> heads, const TrainConfig& config,
                                       std::uint64_t seed, const EpochCallback& on_epoch = {},
                                       const TrainedCallback& on_trained = {});

struct BenchRow {
  std::string head;
  std::size_t vocab_size = 0;
  std::size_t output_rows = 0;
  std::size_t params = 0;
  double median_ns = 0.0;  // forward + predict per hidden vector
};

struct BenchConfig {
  std::size_t hidden = 512;
  std::size_t trials = 30;
  std::size_t warmup = 3;
  std::size_t batch = 4;
  std::uint64_t seed = 1;
};

// Median over trials of one batch of forward+predict, after warmup.
std::vector<BenchRow> bench_heads(std::span<const std::size_t> vocab_sizes, std::span<const std::string> heads,
                                  const BenchConfig& config);

}  // namespace bitvoc::harness
