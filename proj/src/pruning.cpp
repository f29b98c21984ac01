#include "evoprune/pruning.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "evoprune/error.hpp"

namespace evoprune {

std::string_view to_string(PruneMode mode) {
  return mode == PruneMode::quantile ? "quantile" : "fixed";
}

PruneMode parse_prune_mode(std::string_view name) {
  if (name == "quantile") return PruneMode::quantile;
  if (name == "fixed") return PruneMode::fixed;
  throw ConfigError("unknown prune mode '" + std::string(name) + "'");
}

std::size_t PruneMask::pruned_count() const {
  return static_cast<std::size_t>(std::count(keep.begin(), keep.end(), std::uint8_t{0}));
}

namespace {

double sparsity_of(const std::vector<std::uint8_t>& keep) {
  if (keep.empty()) return 0.0;
  const auto pruned = std::count(keep.begin(), keep.end(), std::uint8_t{0});
  return static_cast<double>(pruned) / static_cast<double>(keep.size());
}

}  // namespace

template <typename T>
PruneMask quantile_threshold(std::span<const T> p, double fraction) {
  if (!(fraction >= 0.0 && fraction < 1.0)) {
    throw ContractViolation("quantile target fraction must lie in [0, 1), got " +
                            std::to_string(fraction));
  }
  const std::size_t n = p.size();
  const auto k = std::min(n, static_cast<std::size_t>(std::llround(fraction * static_cast<double>(n))));

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return p[a] < p[b]; });

  PruneMask mask;
  mask.keep.assign(n, 1);
  for (std::size_t r = 0; r < k; ++r) mask.keep[order[r]] = 0;
  if (n == 0) {
    mask.epsilon_used = 0.0;
  } else if (k < n) {
    mask.epsilon_used = static_cast<double>(p[order[k]]);
  } else {
    mask.epsilon_used = std::nextafter(static_cast<double>(p[order[n - 1]]),
                                       std::numeric_limits<double>::infinity());
  }
  mask.sparsity_achieved = sparsity_of(mask.keep);
  return mask;
}

template <typename T>
PruneMask fixed_threshold_prune(std::span<const T> p, double epsilon) {
  if (!(epsilon >= 0.0)) throw ContractViolation("fixed threshold must be >= 0");
  PruneMask mask;
  mask.keep.resize(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) {
    mask.keep[i] = static_cast<double>(p[i]) < epsilon ? 0 : 1;
  }
  mask.epsilon_used = epsilon;
  mask.sparsity_achieved = sparsity_of(mask.keep);
  return mask;
}

template <typename T>
PruneMask build_mask(std::span<const T> p, const PruneSpec& spec) {
  return spec.mode == PruneMode::quantile ? quantile_threshold(p, spec.value)
                                          : fixed_threshold_prune(p, spec.value);
}

template <typename T>
std::vector<T> apply_mask(std::span<const T> p, const PruneMask& mask) {
  if (p.size() != mask.keep.size()) throw ContractViolation("apply_mask: length mismatch");
  std::vector<T> out(p.begin(), p.end());
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (!mask.keep[i]) out[i] = T{0};
  }
  return out;
}

PruneReport prune_and_report(const ModelParams<float>& params, std::span<const float> p,
                             const Dataset& testset, const PruneSpec& spec,
                             double baseline_accuracy, DynamicKind dynamic) {
  const auto mask = build_mask(p, spec);
  const auto masked = apply_mask(p, mask);
  PruneReport report;
  report.dynamic = dynamic;
  report.mode = spec.mode;
  report.target = spec.value;
  report.epsilon = mask.epsilon_used;
  report.sparsity = mask.sparsity_achieved;
  report.baseline_accuracy = baseline_accuracy;
  report.pruned_accuracy = evaluate(params, std::span<const float>(masked), testset);
  report.accuracy_drop = report.baseline_accuracy - report.pruned_accuracy;
  return report;
}

#define EVOPRUNE_INSTANTIATE(T)                                                        \
  template PruneMask quantile_threshold<T>(std::span<const T>, double);                \
  template PruneMask fixed_threshold_prune<T>(std::span<const T>, double);             \
  template PruneMask build_mask<T>(std::span<const T>, const PruneSpec&);              \
  template std::vector<T> apply_mask<T>(std::span<const T>, const PruneMask&);

EVOPRUNE_INSTANTIATE(float)
EVOPRUNE_INSTANTIATE(double)

#undef EVOPRUNE_INSTANTIATE

}  // namespace evoprune
