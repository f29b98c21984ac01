#include "evoprune/results.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

namespace evoprune {

namespace {

std::string num(double v, int digits = 10) {
  if (!std::isfinite(v)) return "";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*g", digits, v);
  return buf;
}

std::string fixed(double v, int decimals) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
  return buf;
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream ss(line);
  while (std::getline(ss, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

std::string strip_cr(std::string s) {
  if (!s.empty() && s.back() == '\r') s.pop_back();
  return s;
}

}  // namespace

void write_reports_csv(std::ostream& out, std::span<const PruneReport> reports) {
  out << kReportCsvHeader << '\n';
  for (const auto& r : reports) {
    out << to_string(r.dynamic) << ',' << to_string(r.mode) << ',' << num(r.target) << ','
        << num(r.epsilon) << ',' << num(r.sparsity) << ',' << num(r.baseline_accuracy) << ','
        << num(r.pruned_accuracy) << ',' << num(r.accuracy_drop) << '\n';
  }
}

nlohmann::json reports_to_json(std::span<const PruneReport> reports) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& r : reports) {
    arr.push_back({{"dynamic", std::string(to_string(r.dynamic))},
                   {"mode", std::string(to_string(r.mode))},
                   {"target", r.target},
                   {"epsilon", r.epsilon},
                   {"sparsity", r.sparsity},
                   {"baseline_acc", r.baseline_accuracy},
                   {"pruned_acc", r.pruned_accuracy},
                   {"drop", r.accuracy_drop}});
  }
  return arr;
}

std::vector<PruneReport> read_reports_csv(std::istream& in, const std::string& source) {
  std::string line;
  if (!std::getline(in, line) || strip_cr(line) != kReportCsvHeader) {
    throw std::runtime_error(source + ": expected header '" + kReportCsvHeader + "'");
  }
  std::vector<PruneReport> out;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    line = strip_cr(line);
    if (line.empty()) continue;
    const auto f = split_csv_line(line);
    if (f.size() != 8) {
      throw std::runtime_error(source + ":" + std::to_string(lineno) + ": expected 8 fields, got " +
                               std::to_string(f.size()));
    }
    try {
      PruneReport r;
      r.dynamic = parse_dynamic_kind(f[0]);
      r.mode = parse_prune_mode(f[1]);
      r.target = std::stod(f[2]);
      r.epsilon = std::stod(f[3]);
      r.sparsity = std::stod(f[4]);
      r.baseline_accuracy = std::stod(f[5]);
      r.pruned_accuracy = std::stod(f[6]);
      r.accuracy_drop = std::stod(f[7]);
      out.push_back(r);
    } catch (const std::exception& e) {
      throw std::runtime_error(source + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

std::vector<PruneReport> read_reports_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return read_reports_csv(in, path.string());
}

void write_metrics_csv(std::ostream& out, const MetricsLog& log) {
  out << "epoch,train_loss,test_accuracy,total_mass,min_mass,q25_mass,median_mass,q75_mass,"
         "max_mass,below_0_1\n";
  for (const auto& m : log) {
    out << m.epoch << ',' << num(m.train_loss) << ',' << num(m.test_accuracy) << ','
        << num(m.total_mass) << ',' << num(m.min_mass) << ',' << num(m.q25_mass) << ','
        << num(m.median_mass) << ',' << num(m.q75_mass) << ',' << num(m.max_mass) << ','
        << m.below_0_1 << '\n';
  }
}

void write_mass_histogram_csv(std::ostream& out, const MetricsLog& log) {
  out << "epoch,bin_lo,bin_hi,count\n";
  for (const auto& m : log) {
    for (std::size_t b = 0; b < m.histogram.size(); ++b) {
      const double lo = static_cast<double>(b) * kHistogramWidth;
      out << m.epoch << ',' << num(lo, 6) << ','
          << (b + 1 < m.histogram.size() ? num(lo + kHistogramWidth, 6) : std::string{}) << ','
          << m.histogram[b] << '\n';
    }
  }
}

void write_population_csv(std::ostream& out, const TrainState& state) {
  const auto& arch = state.params.arch;
  out << "index,layer,neuron,mass\n";
  for (std::size_t h = 0; h < arch.num_hidden(); ++h) {
    const std::size_t offset = arch.population_offset(h);
    for (std::size_t i = 0; i < arch.widths[h + 1]; ++i) {
      out << offset + i << ',' << h + 1 << ',' << i << ','
          << num(static_cast<double>(state.population[offset + i]), 9) << '\n';
    }
  }
}

void write_accuracy_curve_csv(std::ostream& out, std::span<const PruneReport> reports) {
  out << "fraction,epsilon,sparsity,pruned_acc\n";
  for (const auto& r : reports) {
    out << num(r.target) << ',' << num(r.epsilon) << ',' << num(r.sparsity) << ','
        << num(r.pruned_accuracy) << '\n';
  }
}

MergedTable merge_reports(const std::vector<std::vector<PruneReport>>& runs) {
  if (runs.empty()) throw std::invalid_argument("merge_reports: no runs given");

  std::vector<std::string> groups;
  std::map<std::string, int> seen;
  for (const auto& run : runs) {
    if (run.empty()) throw std::invalid_argument("merge_reports: a run has no report rows");
    std::string name(to_string(run.front().dynamic));
    if (const int n = ++seen[name]; n > 1) name += "#" + std::to_string(n);
    groups.push_back(name);
  }

  // Row keys in first-seen order.
  std::vector<std::pair<PruneMode, double>> keys;
  for (const auto& run : runs) {
    for (const auto& r : run) {
      const std::pair<PruneMode, double> key{r.mode, r.target};
      if (std::find(keys.begin(), keys.end(), key) == keys.end()) keys.push_back(key);
    }
  }
  auto lookup = [](const std::vector<PruneReport>& run,
                   const std::pair<PruneMode, double>& key) -> const PruneReport* {
    for (const auto& r : run) {
      if (r.mode == key.first && r.target == key.second) return &r;
    }
    return nullptr;
  };

  std::ostringstream csv;
  csv << "mode,target";
  for (const auto& g : groups) {
    csv << ',' << g << "_epsilon," << g << "_sparsity," << g << "_pruned_acc," << g << "_drop";
  }
  csv << '\n';
  for (const auto& key : keys) {
    csv << to_string(key.first) << ',' << num(key.second);
    for (const auto& run : runs) {
      if (const auto* r = lookup(run, key)) {
        csv << ',' << num(r->epsilon) << ',' << num(r->sparsity) << ',' << num(r->pruned_accuracy)
            << ',' << num(r->accuracy_drop);
      } else {
        csv << ",,,,";
      }
    }
    csv << '\n';
  }

  std::ostringstream md;
  md << "Baseline accuracy:";
  for (std::size_t g = 0; g < runs.size(); ++g) {
    md << (g ? ", " : " ") << groups[g] << ' ' << fixed(runs[g].front().baseline_accuracy, 4);
  }
  md << "\n";
  for (PruneMode mode : {PruneMode::quantile, PruneMode::fixed}) {
    const bool any = std::any_of(keys.begin(), keys.end(), [&](auto& k) { return k.first == mode; });
    if (!any) continue;
    const bool quantile = mode == PruneMode::quantile;
    md << "\n| " << (quantile ? "Sparsity (%)" : "Threshold eps") << " |";
    for (const auto& g : groups) md << ' ' << g << (quantile ? " eps" : " sparsity") << " | " << g << " Acc. (Drop) |";
    md << "\n|---|";
    for (std::size_t g = 0; g < groups.size(); ++g) md << "---|---|";
    md << '\n';
    for (const auto& key : keys) {
      if (key.first != mode) continue;
      md << "| " << (quantile ? fixed(key.second * 100.0, 1) : num(key.second, 4)) << " |";
      for (const auto& run : runs) {
        if (const auto* r = lookup(run, key)) {
          md << ' ' << (quantile ? fixed(r->epsilon, 4) : fixed(r->sparsity * 100.0, 1) + "%")
             << " | " << fixed(r->pruned_accuracy, 4) << " (" << fixed(r->accuracy_drop, 4)
             << ") |";
        } else {
          md << " - | - |";
        }
      }
      md << '\n';
    }
  }
  return {csv.str(), md.str()};
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
  if (!out) throw std::runtime_error("short write to " + path.string());
}

}  // namespace evoprune
