#pragma once

#include <optional>
#include <string>
#include <vector>

#include "paradram/kernel.hpp"
#include "paradram/parallel.hpp"
#include "paradram/refine.hpp"
#include "paradram/simulation_spec.hpp"

namespace paradram {

/// What goes into a `_report.txt` file. Pointers may be null when a section
/// does not apply (e.g. the top-level report of a multi-chain run).
struct ReportContent {
  const SimulationSpec* spec = nullptr;
  std::string scope;  // "serial", "forkjoin", "multichain", "multichain member 2 of 4"
  const KernelSummary* summary = nullptr;
  const RefinedSample* refined = nullptr;
  std::optional<ContributionTally> tally;
  std::optional<SpeedupReport> speedup;
  std::string speedupSource;  // how p was obtained
  std::optional<ConvergenceReport> convergence;
  std::vector<std::string> failures;
};

/// Sectioned plain text ending in kReportTerminator. Table rows are
/// whitespace separated and start with the table name so they can be pulled
/// out with a line filter.
std::string format_report(const ReportContent& content);

/// Means of `values` over `windows` contiguous, (near) equal slices.
std::vector<double> window_means(const std::vector<double>& values, std::size_t windows);

/// Probability of a completed fork-join attempt (any DR stage) accepting.
double attempt_acceptance_rate(const KernelSummary& summary);

/// Rows `<table> <fields...>` of a report, fields split on whitespace.
std::vector<std::vector<std::string>> report_table(const std::string& reportText, std::string_view table);

/// Value of the first `key = value` line of the report.
std::optional<std::string> report_value(const std::string& reportText, std::string_view key);

}  // namespace paradram
