#include "evoprune/cli.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "evoprune/checkpoint.hpp"
#include "evoprune/data.hpp"
#include "evoprune/error.hpp"
#include "evoprune/experiment.hpp"
#include "evoprune/gradcheck.hpp"
#include "evoprune/results.hpp"

namespace evoprune::cli {

namespace fs = std::filesystem;

namespace {

constexpr double kGradcheckTolerance = 1e-4;

struct Options {
  std::string config_path;
  std::string dynamic;
  std::optional<std::uint64_t> seed;
  std::optional<std::uint64_t> epochs;
  std::string out_dir;
  std::string data_dir;
  std::string checkpoint;
  std::string resume;
  std::vector<double> fractions = kDefaultFractions;
  std::vector<double> thresholds = kDefaultThresholds;
  std::string size = "tiny";
  std::size_t batch = 4;
  double step = 1e-5;
  std::vector<std::string> run_dirs;
};

class UsageError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string fmt(const char* spec, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, spec, v);
  return buf;
}

fs::path resolve_data_dir(const Options& o, const TrainConfig& cfg) {
  if (!o.data_dir.empty()) return o.data_dir;
  if (!cfg.data_dir.empty()) return cfg.data_dir;
  if (const char* env = std::getenv("EVOPRUNE_DATA_DIR"); env != nullptr && *env != '\0') return env;
  throw UsageError("no MNIST directory given: pass --data-dir, set data_dir in the config, or set "
                   "EVOPRUNE_DATA_DIR");
}

Dataset load_split(const fs::path& dir, Split split) {
  if (!fs::is_directory(dir)) {
    throw std::runtime_error("MNIST directory " + dir.string() + " does not exist");
  }
  return load_mnist(dir, split);
}

void write_csv(const fs::path& path, const std::function<void(std::ostream&)>& body) {
  std::ostringstream ss;
  body(ss);
  write_text_file(path, ss.str());
}

void print_reports(std::ostream& out, std::span<const PruneReport> reports) {
  out << "dynamic     mode      target   epsilon   sparsity  acc     drop\n";
  for (const auto& r : reports) {
    char line[160];
    std::snprintf(line, sizeof line, "%-11s %-9s %-8.4g %-9.4f %-9.4f %-7.4f %.4f\n",
                  std::string(to_string(r.dynamic)).c_str(), std::string(to_string(r.mode)).c_str(),
                  r.target, r.epsilon, r.sparsity, r.pruned_accuracy, r.accuracy_drop);
    out << line;
  }
}

int cmd_train(const Options& o, std::ostream& out, std::ostream& err) {
  TrainState state;
  TrainConfig cfg;
  if (!o.resume.empty()) {
    state = load_checkpoint(o.resume);
    cfg = state.config;
    if (!o.dynamic.empty() && parse_dynamic_kind(o.dynamic) != cfg.dynamics.kind) {
      throw UsageError("--dynamic conflicts with the resumed checkpoint's dynamic");
    }
  } else if (!o.config_path.empty()) {
    cfg = load_config(o.config_path);
  }
  if (o.resume.empty()) {
    if (!o.dynamic.empty()) cfg.dynamics.kind = parse_dynamic_kind(o.dynamic);
    if (o.seed) cfg.seed = *o.seed;
  } else if (o.seed && *o.seed != cfg.seed) {
    throw UsageError("--seed conflicts with the resumed checkpoint's seed");
  }
  if (o.epochs) cfg.epochs = *o.epochs;
  if (!o.data_dir.empty()) cfg.data_dir = o.data_dir;
  cfg.validate();

  const auto data_dir = resolve_data_dir(o, cfg);
  const auto train_set = load_split(data_dir, Split::train);
  const auto test_set = load_split(data_dir, Split::test);

  if (o.resume.empty()) {
    state = init_state(cfg, train_set.input_dim(), kNumClasses);
  } else {
    state.config.epochs = cfg.epochs;
    state.config.data_dir = cfg.data_dir;
  }

  const fs::path out_dir = o.out_dir;
  fs::create_directories(out_dir);
  write_text_file(out_dir / "config.json", nlohmann::json(state.config).dump(2) + "\n");

  out << "training " << to_string(cfg.dynamics.kind) << " for " << cfg.epochs << " epochs on "
      << train_set.size() << " samples (N = " << state.population.size() << " populations)\n";
  auto t0 = std::chrono::steady_clock::now();
  auto on_epoch = [&](const TrainState& s) {
    save_checkpoint(s, out_dir / "last.ckpt");
    write_csv(out_dir / "metrics.csv", [&](std::ostream& os) { write_metrics_csv(os, s.metrics); });
    write_csv(out_dir / "mass_histogram.csv",
              [&](std::ostream& os) { write_mass_histogram_csv(os, s.metrics); });
    const auto& m = s.metrics.back();
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    out << "epoch " << m.epoch << "/" << s.config.epochs << "  loss " << fmt("%.4f", m.train_loss)
        << "  test_acc " << fmt("%.4f", m.test_accuracy) << "  mass " << fmt("%.2f", m.total_mass)
        << "  p[min,med,max] " << fmt("%.4f", m.min_mass) << "," << fmt("%.4f", m.median_mass)
        << "," << fmt("%.4f", m.max_mass) << "  (" << fmt("%.1f", secs) << "s)\n"
        << std::flush;
  };

  try {
    run_training(state, train_set, test_set, cfg.epochs, on_epoch);
  } catch (const NumericError& e) {
    err << "numeric failure at step " << state.step << " (epoch " << state.epoch + 1
        << "): " << e.what() << "\n";
    if (fs::exists(out_dir / "last.ckpt")) {
      err << "last good checkpoint: " << (out_dir / "last.ckpt").string() << "\n";
    }
    return kExitRuntime;
  }

  save_checkpoint(state, out_dir / "final.ckpt");
  write_csv(out_dir / "population.csv", [&](std::ostream& os) { write_population_csv(os, state); });
  out << "dense baseline accuracy " << fmt("%.4f", baseline_accuracy(state, test_set)) << "\n"
      << "wrote " << (out_dir / "final.ckpt").string() << "\n";
  return kExitOk;
}

struct LoadedRun {
  TrainState state;
  Dataset test_set;
  fs::path out_dir;
};

LoadedRun load_run(const Options& o) {
  LoadedRun run;
  run.state = load_checkpoint(o.checkpoint);
  run.test_set = load_split(resolve_data_dir(o, run.state.config), Split::test);
  run.out_dir = o.out_dir.empty() ? fs::path(o.checkpoint).parent_path() : fs::path(o.out_dir);
  if (run.out_dir.empty()) run.out_dir = ".";
  return run;
}

int cmd_sweep(const Options& o, std::ostream& out) {
  for (double f : o.fractions) {
    if (!(f >= 0.0 && f < 1.0)) throw UsageError("--fractions entries must lie in [0, 1)");
  }
  auto run = load_run(o);
  const auto reports = sparsity_sweep(run.state, run.test_set, o.fractions);
  write_csv(run.out_dir / "sweep.csv", [&](std::ostream& os) { write_reports_csv(os, reports); });
  write_text_file(run.out_dir / "sweep.json", reports_to_json(reports).dump(2) + "\n");

  std::vector<double> curve_fractions;
  for (int i = 0; i < 20; ++i) curve_fractions.push_back(0.05 * i);
  const auto curve = sparsity_sweep(run.state, run.test_set, curve_fractions);
  write_csv(run.out_dir / "accuracy_curve.csv",
            [&](std::ostream& os) { write_accuracy_curve_csv(os, curve); });

  out << "baseline accuracy " << fmt("%.4f", reports.empty() ? 0.0 : reports.front().baseline_accuracy)
      << "\n";
  print_reports(out, reports);
  out << "wrote " << (run.out_dir / "sweep.csv").string() << "\n";
  return kExitOk;
}

int cmd_threshold_sweep(const Options& o, std::ostream& out) {
  for (double t : o.thresholds) {
    if (!(t >= 0.0)) throw UsageError("--thresholds entries must be >= 0");
  }
  auto run = load_run(o);
  const auto reports = threshold_sweep(run.state, run.test_set, o.thresholds);
  write_csv(run.out_dir / "threshold.csv", [&](std::ostream& os) { write_reports_csv(os, reports); });
  write_text_file(run.out_dir / "threshold.json", reports_to_json(reports).dump(2) + "\n");
  print_reports(out, reports);
  out << "wrote " << (run.out_dir / "threshold.csv").string() << "\n";
  return kExitOk;
}

int cmd_eval(const Options& o, std::ostream& out) {
  auto run = load_run(o);
  const double acc = baseline_accuracy(run.state, run.test_set);
  const auto summary = summarize_population(run.state.population);
  nlohmann::json j{{"checkpoint", o.checkpoint},
                   {"dynamic", std::string(to_string(run.state.config.dynamics.kind))},
                   {"epoch", run.state.epoch},
                   {"test_accuracy", acc},
                   {"total_mass", summary.total_mass},
                   {"min_mass", summary.min_mass},
                   {"max_mass", summary.max_mass}};
  write_text_file(run.out_dir / "eval.json", j.dump(2) + "\n");
  out << "test accuracy " << fmt("%.4f", acc) << " (epoch " << run.state.epoch << ", total mass "
      << fmt("%.3f", summary.total_mass) << ")\n";
  return kExitOk;
}

int cmd_gradcheck(const Options& o, std::ostream& out) {
  const auto arch = gradcheck_architecture(o.size);
  const auto inst = make_gradcheck_instance(arch, o.batch, o.seed.value_or(0));
  const auto r = gradient_check(inst, o.step);
  out << "gradcheck " << o.size << " seed " << o.seed.value_or(0) << ": " << r.entries_checked
      << " entries, max relative error " << fmt("%.3e", r.max_rel_error) << " (params "
      << fmt("%.3e", r.max_rel_error_params) << ", population "
      << fmt("%.3e", r.max_rel_error_population) << ")\n";
  const bool ok = r.max_rel_error < kGradcheckTolerance;
  out << (ok ? "PASS" : "FAIL") << " (tolerance " << fmt("%.0e", kGradcheckTolerance) << ")\n";
  return ok ? kExitOk : kExitRuntime;
}

int cmd_report(const Options& o, std::ostream& out) {
  if (o.run_dirs.empty()) throw UsageError("report needs at least one run directory");
  std::vector<std::vector<PruneReport>> runs;
  for (const auto& dir : o.run_dirs) {
    std::vector<PruneReport> rows;
    bool found = false;
    for (const char* name : {"sweep.csv", "threshold.csv"}) {
      const fs::path path = fs::path(dir) / name;
      if (!fs::exists(path)) continue;
      found = true;
      auto part = read_reports_csv(path);
      rows.insert(rows.end(), part.begin(), part.end());
    }
    if (!found) {
      throw std::runtime_error(dir + ": neither sweep.csv nor threshold.csv present");
    }
    runs.push_back(std::move(rows));
  }
  const auto table = merge_reports(runs);
  if (!o.out_dir.empty()) {
    write_text_file(fs::path(o.out_dir) / "report.csv", table.csv);
    write_text_file(fs::path(o.out_dir) / "report.md", table.markdown);
  }
  out << table.markdown;
  return kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Evolutionary pruning of a population-gated MLP on MNIST", "evoprune"};
  app.require_subcommand(1);
  Options o;

  auto add_seed = [&](CLI::App* c) {
    c->add_option_function<std::uint64_t>(
        "--seed", [&](const std::uint64_t& v) { o.seed = v; }, "Random seed (default 0)");
  };
  auto add_data = [&](CLI::App* c) {
    c->add_option("--data-dir", o.data_dir, "Directory with the MNIST IDX files");
  };

  auto* train = app.add_subcommand("train", "Joint weight/population training");
  train->add_option("--config", o.config_path, "JSON config file")->check(CLI::ExistingFile);
  train->add_option("--dynamic", o.dynamic, "replicator | normalized | mutation");
  add_seed(train);
  train->add_option_function<std::uint64_t>(
      "--epochs", [&](const std::uint64_t& v) { o.epochs = v; }, "Number of epochs");
  train->add_option("--out", o.out_dir, "Output directory")->required();
  train->add_option("--resume", o.resume, "Continue from a checkpoint")->check(CLI::ExistingFile);
  add_data(train);

  auto* sweep = app.add_subcommand("sweep", "Quantile pruning at target sparsities");
  sweep->add_option("--checkpoint", o.checkpoint, "Trained checkpoint")->required()->check(CLI::ExistingFile);
  sweep->add_option("--fractions", o.fractions, "Comma-separated pruned fractions")->delimiter(',');
  sweep->add_option("--out", o.out_dir, "Output directory (default: checkpoint directory)");
  add_data(sweep);

  auto* thresh = app.add_subcommand("threshold-sweep", "Fixed-threshold pruning");
  thresh->add_option("--checkpoint", o.checkpoint, "Trained checkpoint")->required()->check(CLI::ExistingFile);
  thresh->add_option("--thresholds", o.thresholds, "Comma-separated thresholds")->delimiter(',');
  thresh->add_option("--out", o.out_dir, "Output directory (default: checkpoint directory)");
  add_data(thresh);

  auto* eval = app.add_subcommand("eval", "Dense test accuracy of a checkpoint");
  eval->add_option("--checkpoint", o.checkpoint, "Trained checkpoint")->required()->check(CLI::ExistingFile);
  eval->add_option("--out", o.out_dir, "Output directory (default: checkpoint directory)");
  add_data(eval);

  auto* grad = app.add_subcommand("gradcheck", "Finite-difference check of the backward pass");
  grad->add_option("--size", o.size, "tiny | small | mnist")->check(CLI::IsMember({"tiny", "small", "mnist"}));
  add_seed(grad);
  grad->add_option("--batch", o.batch, "Samples in the check batch")->check(CLI::PositiveNumber);
  grad->add_option("--step", o.step, "Central-difference step")->check(CLI::PositiveNumber);

  auto* report = app.add_subcommand("report", "Merge sweep tables from several runs");
  report->add_option("run_dirs", o.run_dirs, "Run directories holding sweep.csv / threshold.csv")->required();
  report->add_option("--out", o.out_dir, "Write report.csv and report.md here");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp& e) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n\n" << app.help();
    return kExitUsage;
  }

  try {
    if (*train) return cmd_train(o, out, err);
    if (*sweep) return cmd_sweep(o, out);
    if (*thresh) return cmd_threshold_sweep(o, out);
    if (*eval) return cmd_eval(o, out);
    if (*grad) return cmd_gradcheck(o, out);
    if (*report) return cmd_report(o, out);
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitUsage;
}

}  // namespace evoprune::cli
