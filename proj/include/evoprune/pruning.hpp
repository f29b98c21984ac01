#pragma once

#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "evoprune/data.hpp"
#include "evoprune/dynamics.hpp"
#include "evoprune/model.hpp"

namespace evoprune {

enum class PruneMode { quantile, fixed };

std::string_view to_string(PruneMode mode);
PruneMode parse_prune_mode(std::string_view name);

struct PruneSpec {
  PruneMode mode = PruneMode::quantile;
  double value = 0.0;  // target fraction (quantile) or epsilon (fixed)

  static PruneSpec quantile(double fraction) { return {PruneMode::quantile, fraction}; }
  static PruneSpec fixed(double epsilon) { return {PruneMode::fixed, epsilon}; }
};

struct PruneMask {
  std::vector<std::uint8_t> keep;  // 1 = keep, 0 = prune
  double epsilon_used = 0.0;
  double sparsity_achieved = 0.0;  // pruned / N

  std::size_t pruned_count() const;
};

struct PruneReport {
  DynamicKind dynamic = DynamicKind::replicator;
  PruneMode mode = PruneMode::quantile;
  double target = 0.0;  // requested fraction or epsilon
  double epsilon = 0.0;
  double sparsity = 0.0;
  double baseline_accuracy = 0.0;
  double pruned_accuracy = 0.0;
  double accuracy_drop = 0.0;  // baseline - pruned
};

// Rank-based cut: prunes exactly k = round(fraction * N) smallest masses, ties
// resolved by pruning the lower index first. The reported epsilon is the
// smallest kept mass (just above the largest mass when everything is pruned),
// so a strict p < epsilon test prunes a subset of this mask, equal unless a
// kept mass ties the largest pruned one.
template <typename T>
PruneMask quantile_threshold(std::span<const T> p, double fraction);

// Prunes every entry with p_i < epsilon (strict).
template <typename T>
PruneMask fixed_threshold_prune(std::span<const T> p, double epsilon);

template <typename T>
PruneMask build_mask(std::span<const T> p, const PruneSpec& spec);

template <typename T>
std::vector<T> apply_mask(std::span<const T> p, const PruneMask& mask);

PruneReport prune_and_report(const ModelParams<float>& params, std::span<const float> p,
                             const Dataset& testset, const PruneSpec& spec,
                             double baseline_accuracy, DynamicKind dynamic);

}  // namespace evoprune
