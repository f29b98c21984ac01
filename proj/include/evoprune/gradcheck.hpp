#pragma once

#include <cstdint>
#include <string>

#include "evoprune/model.hpp"

namespace evoprune {

// A random gated network in 64-bit: He-uniform weights, small random biases,
// masses in [0.5, 1.5], inputs in [-1, 1], random targets.
struct GradCheckInstance {
  ModelParams<double> params;
  std::vector<double> population;
  Matrix<double> inputs;
  std::vector<std::uint8_t> targets;
};

GradCheckInstance make_gradcheck_instance(const Architecture& arch, std::size_t batch,
                                          std::uint64_t seed);

struct GradCheckResult {
  double max_rel_error = 0.0;
  double max_rel_error_params = 0.0;
  double max_rel_error_population = 0.0;
  std::size_t entries_checked = 0;
};

// |a - n| / max(|a|, |n|, floor); the floor keeps vanishing gradients from
// turning round-off into a large ratio.
double relative_error(double analytic, double numeric, double floor = 1e-6);

// Compares backward() against central differences of forward().loss with the
// given step, over every weight, bias and population entry.
GradCheckResult gradient_check(const GradCheckInstance& inst, double step = 1e-5);

// "tiny" = 6-4-3-2, "small" = 12-8-6-4, "mnist" = 784-512-256-10.
Architecture gradcheck_architecture(const std::string& size);

}  // namespace evoprune
