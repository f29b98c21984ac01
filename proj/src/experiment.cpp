#include "evoprune/experiment.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <set>

#include "evoprune/error.hpp"

namespace evoprune {

Architecture TrainConfig::architecture(std::size_t input_dim, std::size_t classes) const {
  Architecture arch;
  arch.widths.push_back(input_dim);
  arch.widths.insert(arch.widths.end(), hidden.begin(), hidden.end());
  arch.widths.push_back(classes);
  return arch;
}

void TrainConfig::validate() const {
  if (epochs == 0) throw ConfigError("epochs must be >= 1");
  if (batch_size == 0) throw ConfigError("batch_size must be >= 1");
  if (!(lr > 0)) throw ConfigError("lr must be > 0");
  if (!(momentum >= 0 && momentum < 1)) throw ConfigError("momentum must lie in [0, 1)");
  if (hidden.empty()) throw ConfigError("hidden must list at least one layer width");
  for (auto w : hidden) {
    if (w == 0) throw ConfigError("hidden layer widths must be >= 1");
  }
  dynamics.validate();
}

namespace {

std::uint64_t fnv1a(std::string_view text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

bool same_bits(double a, double b) {
  return std::bit_cast<std::uint64_t>(a) == std::bit_cast<std::uint64_t>(b);
}

}  // namespace

std::uint64_t TrainConfig::trajectory_hash() const {
  nlohmann::json j = *this;
  j.erase("epochs");
  j.erase("data_dir");
  j.erase("eval_each_epoch");
  return fnv1a(j.dump());
}

void to_json(nlohmann::json& j, const TrainConfig& c) {
  j = nlohmann::json{{"epochs", c.epochs},
                     {"batch_size", c.batch_size},
                     {"lr", c.lr},
                     {"momentum", c.momentum},
                     {"dynamic", std::string(to_string(c.dynamics.kind))},
                     {"eta_p", c.dynamics.eta_p},
                     {"lambda", c.dynamics.lambda},
                     {"mu", c.dynamics.mu},
                     {"mass_cap", c.dynamics.mass_cap},
                     {"clip", c.dynamics.clip},
                     {"seed", c.seed},
                     {"hidden", c.hidden},
                     {"data_dir", c.data_dir},
                     {"eval_each_epoch", c.eval_each_epoch}};
}

void from_json(const nlohmann::json& j, TrainConfig& c) {
  if (!j.is_object()) throw ConfigError("config: expected a JSON object");
  static const std::set<std::string> known{"epochs", "batch_size", "lr",       "momentum",
                                           "dynamic", "eta_p",     "lambda",   "mu",
                                           "mass_cap", "clip",     "seed",     "hidden",
                                           "data_dir", "eval_each_epoch"};
  for (const auto& [key, _] : j.items()) {
    if (!known.contains(key)) throw ConfigError("config: unknown field '" + key + "'");
  }
  auto number = [&](const char* key, double& out) {
    if (!j.contains(key)) return;
    if (!j[key].is_number()) throw ConfigError(std::string("config field '") + key + "': expected a number");
    out = j[key].get<double>();
  };
  auto count = [&](const char* key, std::uint64_t& out) {
    if (!j.contains(key)) return;
    if (!j[key].is_number_unsigned()) {
      throw ConfigError(std::string("config field '") + key + "': expected a non-negative integer");
    }
    out = j[key].get<std::uint64_t>();
  };
  count("epochs", c.epochs);
  count("batch_size", c.batch_size);
  count("seed", c.seed);
  number("lr", c.lr);
  number("momentum", c.momentum);
  number("eta_p", c.dynamics.eta_p);
  number("lambda", c.dynamics.lambda);
  number("mu", c.dynamics.mu);
  number("mass_cap", c.dynamics.mass_cap);
  number("clip", c.dynamics.clip);
  if (j.contains("dynamic")) {
    if (!j["dynamic"].is_string()) throw ConfigError("config field 'dynamic': expected a string");
    try {
      c.dynamics.kind = parse_dynamic_kind(j["dynamic"].get<std::string>());
    } catch (const ConfigError& e) {
      throw ConfigError(std::string("config field 'dynamic': ") + e.what());
    }
  }
  if (j.contains("hidden")) {
    const auto& h = j["hidden"];
    if (!h.is_array()) throw ConfigError("config field 'hidden': expected an array of widths");
    c.hidden.clear();
    for (const auto& w : h) {
      if (!w.is_number_unsigned()) {
        throw ConfigError("config field 'hidden': widths must be positive integers");
      }
      c.hidden.push_back(w.get<std::size_t>());
    }
  }
  if (j.contains("data_dir")) {
    if (!j["data_dir"].is_string()) throw ConfigError("config field 'data_dir': expected a string");
    c.data_dir = j["data_dir"].get<std::string>();
  }
  if (j.contains("eval_each_epoch")) {
    if (!j["eval_each_epoch"].is_boolean()) {
      throw ConfigError("config field 'eval_each_epoch': expected true or false");
    }
    c.eval_each_epoch = j["eval_each_epoch"].get<bool>();
  }
}

TrainConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("config " + path + " is not valid JSON: " + e.what());
  }
  TrainConfig c = j.get<TrainConfig>();
  c.validate();
  return c;
}

bool EpochMetrics::operator==(const EpochMetrics& o) const {
  return epoch == o.epoch && same_bits(train_loss, o.train_loss) &&
         same_bits(test_accuracy, o.test_accuracy) && same_bits(total_mass, o.total_mass) &&
         same_bits(min_mass, o.min_mass) && same_bits(q25_mass, o.q25_mass) &&
         same_bits(median_mass, o.median_mass) && same_bits(q75_mass, o.q75_mass) &&
         same_bits(max_mass, o.max_mass) && below_0_1 == o.below_0_1 &&
         histogram == o.histogram;
}

EpochMetrics summarize_population(std::span<const float> p) {
  EpochMetrics m;
  m.histogram.assign(kHistogramBins + 1, 0);
  if (p.empty()) return m;
  std::vector<double> sorted(p.begin(), p.end());
  std::sort(sorted.begin(), sorted.end());
  auto quantile = [&](double q) {
    const double pos = q * static_cast<double>(sorted.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
    return sorted[lo] + (pos - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
  };
  for (float v : p) {
    m.total_mass += static_cast<double>(v);
    if (v < 0.1f) ++m.below_0_1;
    const auto bin = static_cast<std::size_t>(static_cast<double>(v) / kHistogramWidth);
    ++m.histogram[std::min(bin, kHistogramBins)];
  }
  m.min_mass = sorted.front();
  m.q25_mass = quantile(0.25);
  m.median_mass = quantile(0.5);
  m.q75_mass = quantile(0.75);
  m.max_mass = sorted.back();
  return m;
}

TrainState init_state(const TrainConfig& config, std::size_t input_dim, std::size_t classes) {
  config.validate();
  TrainState s;
  s.config = config;
  const auto arch = config.architecture(input_dim, classes);
  s.params = init_params<float>(arch, config.seed);
  s.momentum = MomentumState<float>::zeros(arch);
  s.population.assign(arch.population_size(), 1.0f);
  return s;
}

StepResult train_step(TrainState& state, const Batch& batch) {
  const auto& cfg = state.config;
  const std::span<const float> p(state.population);
  const std::span<const std::uint8_t> targets(batch.targets);

  const auto trace = forward(state.params, p, batch.inputs, targets);
  const auto grads = backward(trace, state.params, p, batch.inputs, targets);
  sgd_step(state.params, state.momentum, grads.d_params, static_cast<float>(cfg.lr),
           static_cast<float>(cfg.momentum));

  auto fitness = compute_fitness(std::span<const float>(grads.d_p), p,
                                 static_cast<float>(cfg.dynamics.lambda));
  const auto evolved = evolve(p, std::span<const float>(fitness.fitness), cfg.dynamics);
  auto next = project_nonneg(std::span<const float>(evolved));
  for (std::size_t i = 0; i < next.size(); ++i) {
    if (!std::isfinite(next[i])) {
      throw NumericError("population mass " + std::to_string(i) + " became non-finite at step " +
                         std::to_string(state.step));
    }
  }
  state.population = std::move(next);
  return {trace.loss, std::move(fitness)};
}

void run_training(TrainState& state, const Dataset& train_set, const Dataset& test_set,
                  std::uint64_t until_epoch, const EpochCallback& on_epoch,
                  std::uint64_t max_steps) {
  const auto arch = state.params.arch;
  if (train_set.input_dim() != arch.input_dim()) {
    throw ContractViolation("training set width does not match the model input");
  }
  std::uint64_t steps_run = 0;
  while (state.epoch < until_epoch && steps_run < max_steps) {
    const auto batches = epoch_batch_indices(train_set.size(), state.config.batch_size,
                                             state.config.seed, state.epoch);
    while (state.batch_in_epoch < batches.size() && steps_run < max_steps) {
      const auto batch = gather_batch(train_set, batches[state.batch_in_epoch]);
      const auto result = train_step(state, batch);
      state.epoch_loss_sum += static_cast<double>(result.loss);
      ++state.batch_in_epoch;
      ++state.step;
      ++steps_run;
    }
    if (state.batch_in_epoch < batches.size()) break;

    EpochMetrics m = summarize_population(state.population);
    m.epoch = state.epoch + 1;
    m.train_loss = batches.empty() ? 0.0 : state.epoch_loss_sum / static_cast<double>(batches.size());
    m.test_accuracy = (state.config.eval_each_epoch && test_set.size() > 0)
                          ? evaluate(state.params, state.population, test_set)
                          : std::numeric_limits<double>::quiet_NaN();
    state.metrics.push_back(std::move(m));
    ++state.epoch;
    state.batch_in_epoch = 0;
    state.epoch_loss_sum = 0.0;
    if (on_epoch) on_epoch(state);
  }
}

TrainState train(const TrainConfig& config, const Dataset& train_set, const Dataset& test_set,
                 const EpochCallback& on_epoch) {
  auto state = init_state(config, train_set.input_dim(), kNumClasses);
  run_training(state, train_set, test_set, config.epochs, on_epoch);
  return state;
}

double baseline_accuracy(const TrainState& state, const Dataset& test_set) {
  return evaluate(state.params, state.population, test_set);
}

std::vector<PruneReport> sparsity_sweep(const TrainState& state, const Dataset& test_set,
                                        std::span<const double> fractions) {
  const double baseline = baseline_accuracy(state, test_set);
  std::vector<PruneReport> out;
  for (double f : fractions) {
    out.push_back(prune_and_report(state.params, state.population, test_set,
                                   PruneSpec::quantile(f), baseline,
                                   state.config.dynamics.kind));
  }
  return out;
}

std::vector<PruneReport> threshold_sweep(const TrainState& state, const Dataset& test_set,
                                         std::span<const double> thresholds) {
  const double baseline = baseline_accuracy(state, test_set);
  std::vector<PruneReport> out;
  for (double eps : thresholds) {
    out.push_back(prune_and_report(state.params, state.population, test_set,
                                   PruneSpec::fixed(eps), baseline, state.config.dynamics.kind));
  }
  return out;
}

}  // namespace evoprune
