#include "evoprune/dynamics.hpp"

#include <algorithm>
#include <cmath>

#include "evoprune/error.hpp"

namespace evoprune {

namespace {

// max(0, v) that lets NaN through, so a broken update is not disguised as
// an extinction.
template <typename T>
T floor_zero(T v) {
  return v > T{0} || std::isnan(v) ? v : T{0};
}

}  // namespace

std::string_view to_string(DynamicKind kind) {
  switch (kind) {
    case DynamicKind::replicator: return "replicator";
    case DynamicKind::normalized: return "normalized";
    case DynamicKind::mutation: return "mutation";
  }
  return "unknown";
}

DynamicKind parse_dynamic_kind(std::string_view name) {
  if (name == "replicator") return DynamicKind::replicator;
  if (name == "normalized") return DynamicKind::normalized;
  if (name == "mutation") return DynamicKind::mutation;
  throw ConfigError("unknown dynamic '" + std::string(name) +
                    "' (expected replicator, normalized or mutation)");
}

void DynamicsConfig::validate() const {
  if (!(eta_p >= 0)) throw ConfigError("eta_p must be >= 0");
  if (!(lambda >= 0)) throw ConfigError("lambda must be >= 0");
  if (!(mu >= 0)) throw ConfigError("mu must be >= 0");
  if (!(mass_cap > 0)) throw ConfigError("mass_cap (Z) must be > 0");
  if (!(clip > 0)) throw ConfigError("clip must be > 0");
}

namespace {

template <typename T>
void require_same_length(std::span<const T> a, std::span<const T> b, const char* what) {
  if (a.size() != b.size()) throw ContractViolation(std::string(what) + ": length mismatch");
}

template <typename T>
T clip_signal(T s, T bound) {
  return std::clamp(s, -bound, bound);
}

// p_i' = max(0, p_i + eta * (p_i * clip(phi_i - mean))); grouped like the mutation
// update so that mu = 0 reproduces it bit for bit.
template <typename T>
std::vector<T> selection_update(std::span<const T> p, std::span<const T> phi, T mean,
                                const DynamicsConfig& cfg) {
  const T eta = static_cast<T>(cfg.eta_p);
  const T bound = static_cast<T>(cfg.clip);
  std::vector<T> out(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) {
    const T s = clip_signal(phi[i] - mean, bound);
    out[i] = floor_zero(p[i] + eta * (p[i] * s));
  }
  return out;
}

}  // namespace

template <typename T>
FitnessVector<T> compute_fitness(std::span<const T> d_p, std::span<const T> p, T lambda) {
  require_same_length(d_p, p, "compute_fitness");
  FitnessVector<T> f{std::vector<T>(p.size()), std::vector<T>(p.size())};
  for (std::size_t i = 0; i < p.size(); ++i) {
    f.contribution[i] = std::abs(d_p[i]);
    f.fitness[i] = f.contribution[i] - lambda * p[i];
  }
  return f;
}

template <typename T>
T weighted_fitness_sum(std::span<const T> p, std::span<const T> phi) {
  require_same_length(p, phi, "weighted_fitness_sum");
  T acc{0};
  for (std::size_t i = 0; i < p.size(); ++i) acc += p[i] * phi[i];
  return acc;
}

template <typename T>
T total_mass(std::span<const T> p) {
  T acc{0};
  for (auto v : p) acc += v;
  return acc;
}

template <typename T>
T weighted_mean_fitness(std::span<const T> p, std::span<const T> phi) {
  const T mass = total_mass(p);
  if (!(mass > T{0})) {
    throw DegeneratePopulation("total population mass is " +
                               std::to_string(static_cast<double>(mass)) +
                               "; weighted mean fitness undefined");
  }
  return weighted_fitness_sum(p, phi) / mass;
}

template <typename T>
std::vector<T> replicator_step(std::span<const T> p, std::span<const T> phi,
                               const DynamicsConfig& cfg) {
  return selection_update(p, phi, weighted_mean_fitness(p, phi), cfg);
}

template <typename T>
std::vector<T> normalized_step(std::span<const T> p, std::span<const T> phi,
                               const DynamicsConfig& cfg) {
  if (!(cfg.mass_cap > 0)) throw ContractViolation("normalized_step: Z must be > 0");
  // Same division as the replicator mean so that sum p == Z gives identical bits.
  const T mean = weighted_fitness_sum(p, phi) / static_cast<T>(cfg.mass_cap);
  return selection_update(p, phi, mean, cfg);
}

template <typename T>
std::vector<T> mutation_step(std::span<const T> p, std::span<const T> phi,
                             const DynamicsConfig& cfg) {
  const T mean = weighted_mean_fitness(p, phi);
  const T eta = static_cast<T>(cfg.eta_p);
  const T bound = static_cast<T>(cfg.clip);
  const T mu = static_cast<T>(cfg.mu);
  const T uniform_share = T{1} / static_cast<T>(p.size());
  std::vector<T> out(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) {
    const T s = clip_signal(phi[i] - mean, bound);
    out[i] = floor_zero(p[i] + eta * (p[i] * s + mu * (uniform_share - p[i])));
  }
  return out;
}

template <typename T>
std::vector<T> project_nonneg(std::span<const T> p) {
  std::vector<T> out(p.size());
  std::transform(p.begin(), p.end(), out.begin(), [](T v) { return floor_zero(v); });
  return out;
}

template <typename T>
std::vector<T> evolve(std::span<const T> p, std::span<const T> phi, const DynamicsConfig& cfg) {
  switch (cfg.kind) {
    case DynamicKind::replicator: return replicator_step(p, phi, cfg);
    case DynamicKind::normalized: return normalized_step(p, phi, cfg);
    case DynamicKind::mutation: return mutation_step(p, phi, cfg);
  }
  throw ContractViolation("evolve: unknown dynamic kind");
}

#define EVOPRUNE_INSTANTIATE(T)                                                                  \
  template FitnessVector<T> compute_fitness<T>(std::span<const T>, std::span<const T>, T);       \
  template T weighted_fitness_sum<T>(std::span<const T>, std::span<const T>);                    \
  template T total_mass<T>(std::span<const T>);                                                  \
  template T weighted_mean_fitness<T>(std::span<const T>, std::span<const T>);                   \
  template std::vector<T> replicator_step<T>(std::span<const T>, std::span<const T>,             \
                                             const DynamicsConfig&);                             \
  template std::vector<T> normalized_step<T>(std::span<const T>, std::span<const T>,             \
                                             const DynamicsConfig&);                             \
  template std::vector<T> mutation_step<T>(std::span<const T>, std::span<const T>,               \
                                           const DynamicsConfig&);                               \
  template std::vector<T> project_nonneg<T>(std::span<const T>);                                 \
  template std::vector<T> evolve<T>(std::span<const T>, std::span<const T>, const DynamicsConfig&);

EVOPRUNE_INSTANTIATE(float)
EVOPRUNE_INSTANTIATE(double)

#undef EVOPRUNE_INSTANTIATE

}  // namespace evoprune
