#pragma once

// Population-mass selection dynamics, discrete form. With selection signal
// s_i = clip(phi_i - m, -clip, +clip):
//
//   replicator:  m = sum_j p_j phi_j / sum_j p_j,  p_i' = p_i + eta * p_i * s_i
//   normalized:  m = sum_j p_j phi_j / Z (Z fixed), p_i' = p_i + eta * p_i * s_i
//   mutation:    m as replicator,  p_i' = p_i + eta * (p_i * s_i + mu * (1/N - p_i))
//
// followed by the clamp max(0, .). The mutation term is not clipped.

#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace evoprune {

enum class DynamicKind { replicator, normalized, mutation };

std::string_view to_string(DynamicKind kind);
DynamicKind parse_dynamic_kind(std::string_view name);

struct DynamicsConfig {
  DynamicKind kind = DynamicKind::replicator;
  double eta_p = 5e-4;     // population learning rate; 0 freezes p
  double lambda = 1e-3;    // linear decay pressure in the fitness
  double mu = 2e-3;        // mutation rate
  double mass_cap = 768.0; // Z, normalized dynamic only
  double clip = 0.10;      // bound on |s_i|

  void validate() const;
  bool operator==(const DynamicsConfig&) const = default;
};

template <typename T>
struct FitnessVector {
  std::vector<T> contribution;  // c_i = |dL/dp_i|
  std::vector<T> fitness;       // phi_i = c_i - lambda * p_i
};

template <typename T>
FitnessVector<T> compute_fitness(std::span<const T> d_p, std::span<const T> p, T lambda);

// sum_j p_j phi_j, summed in index order.
template <typename T>
T weighted_fitness_sum(std::span<const T> p, std::span<const T> phi);

template <typename T>
T total_mass(std::span<const T> p);

// Population-weighted mean fitness; throws DegeneratePopulation if sum p = 0.
template <typename T>
T weighted_mean_fitness(std::span<const T> p, std::span<const T> phi);

template <typename T>
std::vector<T> replicator_step(std::span<const T> p, std::span<const T> phi,
                               const DynamicsConfig& cfg);

template <typename T>
std::vector<T> normalized_step(std::span<const T> p, std::span<const T> phi,
                               const DynamicsConfig& cfg);

template <typename T>
std::vector<T> mutation_step(std::span<const T> p, std::span<const T> phi,
                             const DynamicsConfig& cfg);

template <typename T>
std::vector<T> project_nonneg(std::span<const T> p);

// Dispatches on cfg.kind.
template <typename T>
std::vector<T> evolve(std::span<const T> p, std::span<const T> phi, const DynamicsConfig& cfg);

}  // namespace evoprune
