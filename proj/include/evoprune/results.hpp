#pragma once

#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "evoprune/experiment.hpp"
#include "evoprune/pruning.hpp"

namespace evoprune {

inline constexpr const char* kReportCsvHeader =
    "dynamic,mode,target,epsilon,sparsity,baseline_acc,pruned_acc,drop";

void write_reports_csv(std::ostream& out, std::span<const PruneReport> reports);
nlohmann::json reports_to_json(std::span<const PruneReport> reports);

// Parses a CSV written by write_reports_csv; throws std::runtime_error on a
// header or field mismatch.
std::vector<PruneReport> read_reports_csv(std::istream& in, const std::string& source = "<stream>");
std::vector<PruneReport> read_reports_csv(const std::filesystem::path& path);

// epoch,train_loss,test_accuracy,total_mass,min_mass,q25_mass,median_mass,q75_mass,max_mass,below_0_1
void write_metrics_csv(std::ostream& out, const MetricsLog& log);

// epoch,bin_lo,bin_hi,count (last bin open-ended, bin_hi empty)
void write_mass_histogram_csv(std::ostream& out, const MetricsLog& log);

// index,layer,neuron,mass
void write_population_csv(std::ostream& out, const TrainState& state);

// fraction,epsilon,sparsity,pruned_acc for an evenly spaced set of fractions.
void write_accuracy_curve_csv(std::ostream& out, std::span<const PruneReport> reports);

// Side-by-side comparison with one column group per dynamic and one row per
// (mode, target). Inputs are the reports of each run, in column order.
struct MergedTable {
  std::string csv;
  std::string markdown;
};
MergedTable merge_reports(const std::vector<std::vector<PruneReport>>& runs);

void write_text_file(const std::filesystem::path& path, const std::string& text);

}  // namespace evoprune
