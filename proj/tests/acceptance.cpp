// Acceptance suite. Prints one PASS/FAIL line per criterion.
//
//   evoprune_acceptance properties             synthetic checks, seconds
//   evoprune_acceptance mnist [--data-dir D] [--work-dir W]
//                                              three full 20-epoch runs
//
// Exit status: 0 if every criterion passed, 1 if any failed, 77 if the MNIST
// files are unavailable (reported to ctest as a skip).

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <map>
#include <numeric>
#include <set>
#include <string>
#include <vector>

#include "evoprune/checkpoint.hpp"
#include "evoprune/data.hpp"
#include "evoprune/dynamics.hpp"
#include "evoprune/experiment.hpp"
#include "evoprune/gradcheck.hpp"
#include "evoprune/pruning.hpp"
#include "evoprune/rng.hpp"
#include "support.hpp"

namespace fs = std::filesystem;
using namespace evoprune;

namespace {

constexpr int kSkip = 77;

class Ledger {
 public:
  void check(const std::string& id, bool ok, const std::string& detail) {
    std::printf("%s %-5s %s\n", ok ? "PASS" : "FAIL", id.c_str(), detail.c_str());
    std::fflush(stdout);
    if (!ok) ++failures_;
  }
  static void info(const std::string& detail) {
    std::printf("INFO       %s\n", detail.c_str());
    std::fflush(stdout);
  }
  int failures() const { return failures_; }

 private:
  int failures_ = 0;
};

std::string fmt(const char* spec, double a) {
  char buf[256];
  std::snprintf(buf, sizeof buf, spec, a);
  return buf;
}

std::string fmt(const char* spec, double a, double b) {
  char buf[256];
  std::snprintf(buf, sizeof buf, spec, a, b);
  return buf;
}

// ---------------------------------------------------------------------------
// Property-based criteria

void ac7_gradient_oracle(Ledger& ledger) {
  auto gen = rng::make_engine(7, rng::Stream::synthetic, 7000);
  double worst = 0.0;
  int networks = 0;
  for (std::uint64_t k = 0; k < 24; ++k) {
    Architecture arch;
    arch.widths.push_back(2 + rng::uniform_below(gen, 6));
    const auto hidden = 1 + rng::uniform_below(gen, 3);
    for (std::uint64_t h = 0; h < hidden; ++h) arch.widths.push_back(1 + rng::uniform_below(gen, 6));
    arch.widths.push_back(2 + rng::uniform_below(gen, 4));
    const auto inst = make_gradcheck_instance(arch, 1 + rng::uniform_below(gen, 5), 1000 + k);
    worst = std::max(worst, gradient_check(inst, 1e-5).max_rel_error);
    ++networks;
  }
  ledger.check("AC7", networks >= 20 && worst < 1e-4,
               std::to_string(networks) + " random gated networks, max relative error " +
                   fmt("%.3e", worst) + " (limit 1e-4, 64-bit)");
}

void ac8_mass_conservation(Ledger& ledger) {
  auto gen = rng::make_engine(8, rng::Stream::synthetic, 8000);
  DynamicsConfig cfg;
  cfg.eta_p = 0.5;
  cfg.clip = 0.1;
  double worst = 0.0;
  int states = 0;
  for (int trial = 0; trial < 150; ++trial) {
    const std::size_t n = 2 + rng::uniform_below(gen, 1000);
    std::vector<double> p(n), phi(n);
    for (auto& v : p) v = rng::uniform(gen, 0.01, 3.0);
    for (auto& v : phi) v = rng::uniform(gen, -0.045, 0.045);
    const double mean = weighted_mean_fitness(std::span<const double>(p), std::span<const double>(phi));
    bool clipped = false;
    for (double f : phi) clipped = clipped || std::abs(f - mean) >= cfg.clip;
    const auto out = replicator_step(std::span<const double>(p), std::span<const double>(phi), cfg);
    bool floored = false;
    for (double v : out) floored = floored || v == 0.0;
    if (clipped || floored) continue;
    const double before = std::accumulate(p.begin(), p.end(), 0.0);
    double delta = 0.0;
    for (std::size_t i = 0; i < n; ++i) delta += out[i] - p[i];
    worst = std::max(worst, std::abs(delta) / before);
    ++states;
  }
  ledger.check("AC8", states >= 100 && worst < 1e-9,
               std::to_string(states) + " unclipped replicator steps, max |sum dp| / sum p " +
                   fmt("%.3e", worst) + " (limit 1e-9)");
}

void ac9_extinction(Ledger& ledger) {
  auto gen = rng::make_engine(9, rng::Stream::synthetic, 9000);
  const std::size_t n = 768;
  std::vector<double> p(n);
  for (auto& v : p) v = rng::uniform(gen, 0.5, 1.5);
  const std::vector<std::size_t> extinct{0, 100, 511, 767};
  for (auto i : extinct) p[i] = 0.0;
  const double z = std::accumulate(p.begin(), p.end(), 0.0);

  DynamicsConfig rep;
  rep.eta_p = 0.05;
  DynamicsConfig norm = rep;
  norm.kind = DynamicKind::normalized;
  norm.mass_cap = z;
  auto pr = p, pn = p;
  bool absorbed = true;
  for (int step = 0; step < 1000; ++step) {
    std::vector<double> phi(n);
    for (auto& v : phi) v = rng::uniform(gen, -0.5, 0.5);
    pr = project_nonneg(std::span<const double>(evolve(std::span<const double>(pr), std::span<const double>(phi), rep)));
    pn = project_nonneg(std::span<const double>(evolve(std::span<const double>(pn), std::span<const double>(phi), norm)));
    for (auto i : extinct) absorbed = absorbed && pr[i] == 0.0 && pn[i] == 0.0;
  }

  DynamicsConfig mut;
  mut.kind = DynamicKind::mutation;  // defaults: eta_p 5e-4, mu 2e-3
  std::vector<double> phi(n);
  for (auto& v : phi) v = rng::uniform(gen, -0.5, 0.5);
  const auto pm = evolve(std::span<const double>(p), std::span<const double>(phi), mut);
  const double expected = mut.eta_p * (mut.mu * (1.0 / static_cast<double>(n)));
  bool regrown = true;
  double rel = 0.0;
  for (auto i : extinct) {
    regrown = regrown && pm[i] == expected;
    rel = std::max(rel, std::abs(pm[i] - mut.eta_p * mut.mu / static_cast<double>(n)) /
                            (mut.eta_p * mut.mu / static_cast<double>(n)));
  }
  ledger.check("AC9", absorbed && regrown,
               std::string("replicator/normalized hold p_i = 0 for 1000 steps: ") +
                   (absorbed ? "yes" : "no") + "; mutation lifts p_i = 0 to eta_p*mu/N = " +
                   fmt("%.6e", expected) + ": " + (regrown ? "yes" : "no") +
                   fmt(" (rel. deviation %.1e)", rel));
}

void ac10_quantile_oracle(Ledger& ledger) {
  auto gen = rng::make_engine(10, rng::Stream::synthetic, 10000);
  int matched = 0, tie_cases = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = 1 + rng::uniform_below(gen, 1000);
    const bool ties = trial % 2 == 1;
    std::vector<double> p(n);
    for (auto& v : p) {
      v = ties ? static_cast<double>(rng::uniform_below(gen, 6)) * 0.25 : rng::uniform(gen, 0.0, 2.0);
    }
    const double f = rng::uniform(gen, 0.0, 0.99);
    const auto k = static_cast<std::size_t>(std::llround(f * static_cast<double>(n)));
    std::vector<std::pair<double, std::size_t>> keyed;
    for (std::size_t i = 0; i < n; ++i) keyed.emplace_back(p[i], i);
    std::sort(keyed.begin(), keyed.end());
    std::set<std::size_t> expected;
    for (std::size_t r = 0; r < std::min(k, n); ++r) expected.insert(keyed[r].second);

    const auto mask = quantile_threshold(std::span<const double>(p), f);
    std::set<std::size_t> got;
    for (std::size_t i = 0; i < n; ++i) {
      if (!mask.keep[i]) got.insert(i);
    }
    const bool same_sparsity =
        mask.sparsity_achieved == static_cast<double>(expected.size()) / static_cast<double>(n);
    if (got == expected && same_sparsity) ++matched;
    if (ties) ++tie_cases;
  }
  ledger.check("AC10", matched == 1000,
               std::to_string(matched) + "/1000 random vectors match the sort-and-cut oracle (" +
                   std::to_string(tie_cases) + " with heavy ties)");
}

void ac11_determinism(Ledger& ledger) {
  const auto train_set = testing::synthetic_dataset(300, 24, 11, Split::train);
  const auto test_set = testing::synthetic_dataset(100, 24, 11, Split::test);
  TrainConfig cfg;
  cfg.epochs = 4;
  cfg.batch_size = 32;
  cfg.hidden = {16, 12};
  cfg.lr = 0.05;
  cfg.dynamics.kind = DynamicKind::mutation;
  cfg.dynamics.eta_p = 0.05;

  const auto a = train(cfg, train_set, test_set);
  const auto b = train(cfg, train_set, test_set);
  const bool identical = a == b;

  testing::TempDir dir;
  auto part = init_state(cfg, 24, kNumClasses);
  run_training(part, train_set, test_set, cfg.epochs, {}, 23);  // stops mid-epoch 3
  save_checkpoint(part, dir.path() / "mid.ckpt");
  auto resumed = load_checkpoint(dir.path() / "mid.ckpt");
  run_training(resumed, train_set, test_set, cfg.epochs);
  const bool resume_ok = resumed == a;

  ledger.check("AC11", identical && resume_ok,
               std::string("two miniature runs bit-identical: ") + (identical ? "yes" : "no") +
                   "; resume from mid-epoch checkpoint equals uninterrupted run: " +
                   (resume_ok ? "yes" : "no"));
}

int run_properties() {
  Ledger ledger;
  ac7_gradient_oracle(ledger);
  ac8_mass_conservation(ledger);
  ac9_extinction(ledger);
  ac10_quantile_oracle(ledger);
  ac11_determinism(ledger);
  return ledger.failures() == 0 ? 0 : 1;
}

// ---------------------------------------------------------------------------
// MNIST criteria

struct RunResult {
  TrainState state;
  double baseline = 0.0;
  std::vector<PruneReport> quantile, fixed;
};

TrainConfig protocol_config(DynamicKind kind) {
  TrainConfig c;
  c.dynamics.kind = kind;
  return c;
}

// Reuses a finished checkpoint from an earlier invocation when its config is
// the protocol config; training is deterministic, so the state is the same.
TrainState trained(DynamicKind kind, const Dataset& train_set, const Dataset& test_set,
                   const fs::path& work_dir) {
  const auto cfg = protocol_config(kind);
  const fs::path ckpt = work_dir / (std::string(to_string(kind)) + ".ckpt");
  if (fs::exists(ckpt)) {
    try {
      auto s = load_checkpoint(ckpt);
      auto stored = s.config;
      stored.data_dir.clear();
      if (stored == cfg && s.epoch == cfg.epochs) {
        Ledger::info(std::string(to_string(kind)) + ": reusing " + ckpt.string());
        return s;
      }
    } catch (const std::exception& e) {
      Ledger::info(std::string("ignoring unreadable ") + ckpt.string() + ": " + e.what());
    }
  }
  Ledger::info(std::string("training ") + std::string(to_string(kind)) + " for 20 epochs");
  auto state = train(cfg, train_set, test_set, [&](const TrainState& s) {
    const auto& m = s.metrics.back();
    std::printf("           epoch %2llu  loss %.4f  test_acc %.4f  mass %.3f\n",
                static_cast<unsigned long long>(m.epoch), m.train_loss, m.test_accuracy, m.total_mass);
    std::fflush(stdout);
  });
  fs::create_directories(work_dir);
  save_checkpoint(state, ckpt);
  return state;
}

const PruneReport& row(const std::vector<PruneReport>& rows, double target) {
  for (const auto& r : rows) {
    if (r.target == target) return r;
  }
  throw std::logic_error("missing sweep row");
}

int run_mnist(const fs::path& data_dir, const fs::path& work_dir) {
  Dataset train_set, test_set;
  try {
    train_set = load_mnist(data_dir, Split::train);
    test_set = load_mnist(data_dir, Split::test);
  } catch (const std::exception& e) {
    std::printf("SKIP  MNIST files unavailable (%s)\n", e.what());
    return kSkip;
  }

  Ledger ledger;
  const std::vector<DynamicKind> kinds{DynamicKind::replicator, DynamicKind::normalized,
                                       DynamicKind::mutation};

  // AC6 gate first: it needs only one step.
  {
    const auto first = gather_batch(train_set, epoch_batch_indices(train_set.size(), 128, 0, 0)[0]);
    auto rep = init_state(protocol_config(DynamicKind::replicator));
    auto norm = init_state(protocol_config(DynamicKind::normalized));
    train_step(rep, first);
    train_step(norm, first);
    std::size_t moved = 0;
    for (std::size_t i = 0; i < rep.population.size(); ++i) moved += rep.population[i] != 1.0f;
    ledger.check("AC6", rep.population == norm.population,
                 "replicator and normalized populations after step 1 identical element-wise (" +
                     std::to_string(moved) + " of 768 masses moved)");
  }

  std::map<DynamicKind, RunResult> runs;
  for (auto kind : kinds) {
    RunResult r;
    r.state = trained(kind, train_set, test_set, work_dir);
    r.baseline = baseline_accuracy(r.state, test_set);
    r.quantile = sparsity_sweep(r.state, test_set);
    r.fixed = threshold_sweep(r.state, test_set);
    const auto m = summarize_population(r.state.population);
    Ledger::info(std::string(to_string(kind)) + fmt(": baseline %.4f", r.baseline) +
                 fmt(", mass %.4f, p in [%.4f, ", m.total_mass, m.min_mass) +
                 fmt("%.4f], median %.4f", m.max_mass, m.median_mass));
    for (const auto& q : r.quantile) {
      Ledger::info(fmt("  quantile %.2f", q.target) + fmt(": eps %.4f, acc %.4f", q.epsilon, q.pruned_accuracy) +
                   fmt(", drop %.4f", q.accuracy_drop));
    }
    for (const auto& f : r.fixed) {
      Ledger::info(fmt("  fixed eps %.1f", f.target) + fmt(": sparsity %.1f%%, acc %.4f", 100 * f.sparsity, f.pruned_accuracy));
    }
    runs[kind] = std::move(r);
  }

  // AC1
  {
    bool ok = true;
    std::string detail;
    for (auto kind : kinds) {
      const double b = runs[kind].baseline;
      ok = ok && std::abs(b - 0.9808) <= 0.010;
      detail += std::string(to_string(kind)) + fmt(" %.4f  ", b);
    }
    ledger.check("AC1", ok, "dense baseline within 0.9808 +/- 0.010: " + detail);
  }
  // AC2 and AC3
  auto sweep_check = [&](const char* id, double target, double tol, double ref_rn, double ref_mut) {
    bool ok = true;
    std::string detail;
    for (auto kind : kinds) {
      const double ref = kind == DynamicKind::mutation ? ref_mut : ref_rn;
      const double acc = row(runs[kind].quantile, target).pruned_accuracy;
      ok = ok && std::abs(acc - ref) <= tol;
      detail += std::string(to_string(kind)) + fmt(" %.4f (ref %.4f)  ", acc, ref);
    }
    ledger.check(id, ok, fmt("quantile %.0f%% accuracy within +/- %.2f: ", target * 100, tol) + detail);
  };
  sweep_check("AC2", 0.35, 0.02, 0.9551, 0.9548);
  sweep_check("AC3", 0.50, 0.03, 0.8825, 0.8857);
  // AC4
  {
    bool ok = true;
    std::string detail;
    for (auto kind : kinds) {
      const auto& q = runs[kind].quantile;
      for (std::size_t i = 1; i < q.size(); ++i) ok = ok && q[i].pruned_accuracy < q[i - 1].pruned_accuracy;
      detail += std::string(to_string(kind));
      for (const auto& r : q) detail += fmt(" %.4f", r.pruned_accuracy);
      detail += "  ";
    }
    ledger.check("AC4", ok, "accuracy strictly decreasing over 35/40/45/50%: " + detail);
  }
  // AC5
  {
    bool ok = true;
    std::string detail;
    for (auto kind : kinds) {
      const auto& r6 = row(runs[kind].fixed, 0.6);
      const auto& r7 = row(runs[kind].fixed, 0.7);
      const bool low = r6.sparsity == 0.0 && r6.pruned_accuracy == runs[kind].baseline;
      const bool mid = std::abs(r7.sparsity - 0.55) <= 0.05 && r7.accuracy_drop >= 0.08;
      ok = ok && low && mid;
      detail += std::string(to_string(kind)) + fmt(" eps0.6 %.1f%%", 100 * r6.sparsity) +
                fmt(" eps0.7 %.1f%% drop %.4f  ", 100 * r7.sparsity, r7.accuracy_drop);
    }
    ledger.check("AC5", ok,
                 "fixed thresholds: eps 0.6 prunes 0% at baseline accuracy, eps 0.7 prunes "
                 "55% +/- 5pp with drop >= 0.08: " + detail);
  }
  // AC6 report-only part.
  {
    const auto& a = runs[DynamicKind::replicator];
    const auto& b = runs[DynamicKind::normalized];
    bool same_rows = a.baseline == b.baseline;
    for (std::size_t i = 0; i < a.quantile.size(); ++i) {
      same_rows = same_rows && a.quantile[i].pruned_accuracy == b.quantile[i].pruned_accuracy &&
                  a.quantile[i].sparsity == b.quantile[i].sparsity;
    }
    for (std::size_t i = 0; i < a.fixed.size(); ++i) {
      same_rows = same_rows && a.fixed[i].pruned_accuracy == b.fixed[i].pruned_accuracy &&
                  a.fixed[i].sparsity == b.fixed[i].sparsity;
    }
    Ledger::info(std::string("full-run replicator vs normalized sweep tables agree row-for-row: ") +
                 (same_rows ? "yes" : "no") +
                 (a.state.population == b.state.population ? " (final populations identical)"
                                                           : " (final populations differ)"));
  }
  // Decay-pressure invariant on the full runs.
  {
    bool ok = true;
    std::string detail;
    for (auto kind : kinds) {
      const double mass = summarize_population(runs[kind].state.population).total_mass;
      ok = ok && mass < 768.0;
      detail += std::string(to_string(kind)) + fmt(" %.6f  ", mass);
    }
    ledger.check("MASS", ok, "total mass ends strictly below 768: " + detail);
  }
  return ledger.failures() == 0 ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  const std::string mode = argc > 1 ? argv[1] : "";
  fs::path data_dir, work_dir = fs::temp_directory_path() / "evoprune_acceptance";
  if (const char* env = std::getenv("EVOPRUNE_DATA_DIR"); env != nullptr && *env != '\0') data_dir = env;
  for (int i = 2; i + 1 < argc; i += 2) {
    const std::string flag = argv[i];
    if (flag == "--data-dir" && std::string(argv[i + 1]).size() > 0) {
      data_dir = argv[i + 1];
    } else if (flag == "--work-dir") {
      work_dir = argv[i + 1];
    } else if (flag != "--data-dir") {
      std::fprintf(stderr, "unknown option %s\n", flag.c_str());
      return 2;
    }
  }
  try {
    if (mode == "properties") return run_properties();
    if (mode == "mnist") {
      if (data_dir.empty()) {
        std::printf("SKIP  no MNIST directory (set EVOPRUNE_DATA_DIR or pass --data-dir)\n");
        return kSkip;
      }
      return run_mnist(data_dir, work_dir);
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "acceptance suite aborted: %s\n", e.what());
    return 2;
  }
  std::fprintf(stderr, "usage: %s properties | mnist [--data-dir D] [--work-dir W]\n", argv[0]);
  return 2;
}
