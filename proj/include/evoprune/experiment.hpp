#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "evoprune/data.hpp"
#include "evoprune/dynamics.hpp"
#include "evoprune/model.hpp"
#include "evoprune/pruning.hpp"

namespace evoprune {

struct TrainConfig {
  std::uint64_t epochs = 20;
  std::uint64_t batch_size = 128;
  double lr = 0.01;        // weight learning rate
  double momentum = 0.9;
  DynamicsConfig dynamics;
  std::uint64_t seed = 0;
  std::vector<std::size_t> hidden{512, 256};
  std::string data_dir;
  bool eval_each_epoch = true;

  Architecture architecture(std::size_t input_dim = 784, std::size_t classes = 10) const;
  void validate() const;

  // FNV-1a over the fields that shape the trajectory (everything except
  // epochs, data_dir and eval_each_epoch), so a checkpoint can be extended.
  std::uint64_t trajectory_hash() const;

  bool operator==(const TrainConfig&) const = default;
};

void to_json(nlohmann::json& j, const TrainConfig& c);
// Rejects unknown keys and wrong types with a message naming the field.
void from_json(const nlohmann::json& j, TrainConfig& c);

TrainConfig load_config(const std::string& path);

inline constexpr double kHistogramWidth = 0.05;
inline constexpr std::size_t kHistogramBins = 40;  // [0, 2) plus one overflow bin

struct EpochMetrics {
  std::uint64_t epoch = 0;  // 1-based
  double train_loss = 0.0;
  double test_accuracy = 0.0;  // NaN when not evaluated
  double total_mass = 0.0;
  double min_mass = 0.0;
  double q25_mass = 0.0;
  double median_mass = 0.0;
  double q75_mass = 0.0;
  double max_mass = 0.0;
  std::uint64_t below_0_1 = 0;
  std::vector<std::uint64_t> histogram;  // kHistogramBins + 1 counts

  bool operator==(const EpochMetrics&) const;
};

using MetricsLog = std::vector<EpochMetrics>;

EpochMetrics summarize_population(std::span<const float> p);

struct TrainState {
  TrainConfig config;
  ModelParams<float> params;
  MomentumState<float> momentum;
  std::vector<float> population;
  std::uint64_t epoch = 0;           // completed epochs
  std::uint64_t step = 0;            // completed mini-batch steps
  std::uint64_t batch_in_epoch = 0;  // batches of the current epoch already consumed
  double epoch_loss_sum = 0.0;       // running sum for the current epoch
  MetricsLog metrics;

  bool operator==(const TrainState&) const = default;
};

// Fresh state: He-uniform weights from config.seed, zero momentum, p = 1.
TrainState init_state(const TrainConfig& config, std::size_t input_dim = 784,
                      std::size_t classes = 10);

struct StepResult {
  float loss = 0.0f;
  FitnessVector<float> fitness;
};

// One mini-batch: forward, backward, SGD on the weights, fitness from the same
// backward pass, population update, projection.
StepResult train_step(TrainState& state, const Batch& batch);

using EpochCallback = std::function<void(const TrainState&)>;

// Advances `state` until `until_epoch` epochs are complete or `max_steps`
// further steps have run. The shuffle of epoch e is a pure function of
// (seed, e), so a state saved mid-epoch resumes on the same batch sequence.
void run_training(TrainState& state, const Dataset& train_set, const Dataset& test_set,
                  std::uint64_t until_epoch, const EpochCallback& on_epoch = {},
                  std::uint64_t max_steps = std::numeric_limits<std::uint64_t>::max());

TrainState train(const TrainConfig& config, const Dataset& train_set, const Dataset& test_set,
                 const EpochCallback& on_epoch = {});

// Accuracy of the trained gated model with no mask.
double baseline_accuracy(const TrainState& state, const Dataset& test_set);

inline const std::vector<double> kDefaultFractions{0.35, 0.40, 0.45, 0.50};
inline const std::vector<double> kDefaultThresholds{0.6, 0.7, 0.8, 0.9};

std::vector<PruneReport> sparsity_sweep(const TrainState& state, const Dataset& test_set,
                                        std::span<const double> fractions = kDefaultFractions);

std::vector<PruneReport> threshold_sweep(const TrainState& state, const Dataset& test_set,
                                         std::span<const double> thresholds = kDefaultThresholds);

}  // namespace evoprune
