#include "evoprune/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "evoprune/error.hpp"
#include "evoprune/rng.hpp"

namespace evoprune {

GradCheckInstance make_gradcheck_instance(const Architecture& arch, std::size_t batch,
                                          std::uint64_t seed) {
  GradCheckInstance inst;
  inst.params = init_params<double>(arch, seed);
  auto gen = rng::make_engine(seed, rng::Stream::synthetic, 0);
  for (auto& layer : inst.params.layers) {
    for (auto& b : layer.bias) b = rng::uniform(gen, -0.1, 0.1);
  }
  inst.population.resize(arch.population_size());
  for (auto& p : inst.population) p = rng::uniform(gen, 0.5, 1.5);
  inst.inputs = Matrix<double>(batch, arch.input_dim());
  for (auto& x : inst.inputs.values()) x = rng::uniform(gen, -1.0, 1.0);
  inst.targets.resize(batch);
  for (auto& t : inst.targets) t = static_cast<std::uint8_t>(rng::uniform_below(gen, arch.num_classes()));
  return inst;
}

double relative_error(double analytic, double numeric, double floor) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), floor});
  return std::abs(analytic - numeric) / denom;
}

GradCheckResult gradient_check(const GradCheckInstance& inst, double step) {
  const std::span<const std::uint8_t> targets(inst.targets);
  const auto trace = forward(inst.params, std::span<const double>(inst.population), inst.inputs, targets);
  const auto grads = backward(trace, inst.params, std::span<const double>(inst.population),
                              inst.inputs, targets);

  auto params = inst.params;
  auto population = inst.population;
  auto loss = [&] {
    return forward(params, std::span<const double>(population), inst.inputs, targets).loss;
  };
  auto central = [&](double& slot) {
    const double saved = slot;
    slot = saved + step;
    const double up = loss();
    slot = saved - step;
    const double down = loss();
    slot = saved;
    return (up - down) / (2.0 * step);
  };

  GradCheckResult result;
  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    auto w = params.layers[l].weight.values();
    const auto dw = grads.d_params.layers[l].weight.values();
    for (std::size_t i = 0; i < w.size(); ++i) {
      result.max_rel_error_params =
          std::max(result.max_rel_error_params, relative_error(dw[i], central(w[i])));
      ++result.entries_checked;
    }
    auto& b = params.layers[l].bias;
    const auto& db = grads.d_params.layers[l].bias;
    for (std::size_t i = 0; i < b.size(); ++i) {
      result.max_rel_error_params =
          std::max(result.max_rel_error_params, relative_error(db[i], central(b[i])));
      ++result.entries_checked;
    }
  }
  for (std::size_t i = 0; i < population.size(); ++i) {
    result.max_rel_error_population =
        std::max(result.max_rel_error_population, relative_error(grads.d_p[i], central(population[i])));
    ++result.entries_checked;
  }
  result.max_rel_error = std::max(result.max_rel_error_params, result.max_rel_error_population);
  return result;
}

Architecture gradcheck_architecture(const std::string& size) {
  if (size == "tiny") return {{6, 4, 3, 2}};
  if (size == "small") return {{12, 8, 6, 4}};
  if (size == "mnist") return Architecture::mnist();
  throw ConfigError("unknown gradcheck size '" + size + "' (expected tiny, small or mnist)");
}

}  // namespace evoprune
