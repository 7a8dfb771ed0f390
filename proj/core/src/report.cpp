#include "paradram/report.hpp"

#include <algorithm>
#include <numeric>
#include <sstream>

#include "paradram/persist.hpp"

namespace paradram {

namespace {

void section(std::string& out, std::string_view name) {
  out += "\n[";
  out += name;
  out += "]\n";
}

void value(std::string& out, std::string_view key, const std::string& text) {
  out += key;
  out += " = ";
  out += text;
  out += '\n';
}

void value(std::string& out, std::string_view key, double x) { value(out, key, format_real(x)); }
void value(std::string& out, std::string_view key, std::uint64_t n) { value(out, key, std::to_string(n)); }

void row(std::string& out, std::initializer_list<std::string> fields) {
  bool first = true;
  for (const auto& f : fields) {
    if (!first) out += ' ';
    out += f;
    first = false;
  }
  out += '\n';
}

std::string num(double x) { return format_real(x); }
std::string num(std::uint64_t n) { return std::to_string(n); }

void acceptance_section(std::string& out, const KernelSummary& s) {
  section(out, "acceptance");
  value(out, "verbose_length", s.verboseLength);
  value(out, "compact_length", s.compactLength);
  value(out, "rounds", s.rounds);
  value(out, "mean_acceptance_rate", s.meanAcceptanceRate);
  value(out, "proposal_acceptance_rate", s.proposalAcceptanceRate);
  value(out, "attempt_acceptance_rate", attempt_acceptance_rate(s));
  value(out, "compression_factor",
        s.compactLength == 0 ? 0.0 : static_cast<double>(s.verboseLength) / static_cast<double>(s.compactLength));
  out += "# stage_acceptance <stage> <accepted> <rate per round>\n";
  for (std::size_t k = 0; k < s.stageAccepts.size(); ++k)
    row(out, {"stage_acceptance", num(std::uint64_t{k}), num(s.stageAccepts[k]), num(s.stageAcceptanceRate[k])});
  value(out, "burnin_location", s.burninLocation);
}

void adaptation_section(std::string& out, const KernelSummary& s) {
  section(out, "adaptation");
  value(out, "adaptations", std::uint64_t{s.adaptations.size()});
  value(out, "final_scale_factor", s.finalProposal.scale_factor());
  if (!s.adaptations.empty()) {
    std::vector<double> measures;
    for (const auto& a : s.adaptations) measures.push_back(a.measure);
    value(out, "first_measure", measures.front());
    value(out, "last_measure", measures.back());
    value(out, "max_measure", *std::max_element(measures.begin(), measures.end()));
    out += "# measure_window <window> <mean adaptation measure>\n";
    const auto means = window_means(measures, 10);
    for (std::size_t w = 0; w < means.size(); ++w) row(out, {"measure_window", num(std::uint64_t{w + 1}), num(means[w])});
  }
  out += "# covariance_history <adaptation> <i> <j> <effective proposal covariance entry>\n";
  for (std::size_t a = 0; a < s.covarianceHistory.size(); ++a) {
    const auto& c = s.covarianceHistory[a];
    for (Eigen::Index i = 0; i < c.rows(); ++i)
      for (Eigen::Index j = 0; j < c.cols(); ++j)
        row(out, {"covariance_history", num(std::uint64_t{a + 1}), num(std::uint64_t(i + 1)), num(std::uint64_t(j + 1)),
                  num(c(i, j))});
  }
}

void refinement_section(std::string& out, const RefinedSample& r) {
  section(out, "refinement");
  value(out, "source_verbose_length", r.sourceVerboseLength);
  out += "# refinement_round <round> <phase> <aggregate IAC> <verbose points kept>\n";
  for (std::size_t k = 0; k < r.rounds.size(); ++k)
    row(out, {"refinement_round", num(std::uint64_t{k + 1}), std::to_string(r.rounds[k].phase),
              num(r.rounds[k].iacAggregate), num(r.rounds[k].keptCount)});
  value(out, "refined_sample_size", std::uint64_t{r.points.size()});
}

void parallel_section(std::string& out, const ReportContent& c) {
  section(out, "parallel");
  value(out, "scope", c.scope);
  if (c.tally) {
    out += "# tally <rank> <accepted states credited>\n";
    for (std::size_t r = 0; r < c.tally->counts.size(); ++r)
      row(out, {"tally", num(std::uint64_t{r + 1}), num(c.tally->counts[r])});
  }
  if (!c.speedup) return;
  value(out, "fitted_acceptance_probability", c.speedup->fittedAcceptanceProb);
  value(out, "acceptance_probability_source", c.speedupSource);
  if (c.speedup->observedSpeedup) value(out, "observed_speedup", *c.speedup->observedSpeedup);
  out += "# speedup <P> <predicted speedup>\n";
  for (const auto& [p, s] : c.speedup->predictedCurve) row(out, {"speedup", num(p), num(s)});
  value(out, "recommended_workers", c.speedup->recommendedP);
}

void convergence_section(std::string& out, const ConvergenceReport& r) {
  section(out, "convergence");
  value(out, "significance", r.significance);
  value(out, "per_test_threshold", r.threshold);
  out += "# ks <chain a> <chain b> <dimension> <statistic> <p-value> <pass>\n";
  for (const auto& t : r.tests)
    row(out, {"ks", num(std::uint64_t{t.first + 1}), num(std::uint64_t{t.second + 1}), std::to_string(t.dimension + 1),
              num(t.result.statistic), num(t.result.pValue), t.passed ? "pass" : "fail"});
  value(out, "converged", std::string(r.passed ? "yes" : "no"));
}

std::vector<std::string> split_ws(const std::string& line) {
  std::istringstream in(line);
  std::vector<std::string> fields;
  for (std::string f; in >> f;) fields.push_back(f);
  return fields;
}

}  // namespace

std::vector<double> window_means(const std::vector<double>& values, std::size_t windows) {
  std::vector<double> means;
  if (values.empty() || windows == 0) return means;
  windows = std::min(windows, values.size());
  for (std::size_t w = 0; w < windows; ++w) {
    const std::size_t lo = w * values.size() / windows;
    const std::size_t hi = (w + 1) * values.size() / windows;
    means.push_back(std::accumulate(values.begin() + lo, values.begin() + hi, 0.0) / static_cast<double>(hi - lo));
  }
  return means;
}

double attempt_acceptance_rate(const KernelSummary& summary) {
  if (summary.rounds == 0) return 1.0;
  const auto accepted = std::accumulate(summary.stageAccepts.begin(), summary.stageAccepts.end(), std::uint64_t{0});
  return static_cast<double>(accepted) / static_cast<double>(summary.rounds);
}

std::string format_report(const ReportContent& c) {
  std::string out = "# paradram simulation report\n";
  if (c.spec) {
    section(out, "specification");
    out += echo_spec(*c.spec);
  }
  if (c.summary) {
    acceptance_section(out, *c.summary);
    adaptation_section(out, *c.summary);
  }
  if (c.refined) refinement_section(out, *c.refined);
  parallel_section(out, c);
  if (c.convergence) convergence_section(out, *c.convergence);
  if (!c.failures.empty()) {
    section(out, "failures");
    for (const auto& f : c.failures) out += f + "\n";
  }
  out += '\n';
  out += kReportTerminator;
  out += '\n';
  return out;
}

std::vector<std::vector<std::string>> report_table(const std::string& reportText, std::string_view table) {
  std::vector<std::vector<std::string>> rows;
  std::istringstream in(reportText);
  for (std::string line; std::getline(in, line);) {
    auto fields = split_ws(line);
    if (!fields.empty() && fields.front() == table) {
      fields.erase(fields.begin());
      rows.push_back(std::move(fields));
    }
  }
  return rows;
}

std::optional<std::string> report_value(const std::string& reportText, std::string_view key) {
  std::istringstream in(reportText);
  const std::string lead = std::string(key) + " = ";
  for (std::string line; std::getline(in, line);) {
    if (!line.starts_with(lead)) continue;
    std::string v = line.substr(lead.size());
    if (const auto hash = v.find("  # "); hash != std::string::npos) v.erase(hash);
    return v;
  }
  return std::nullopt;
}

}  // namespace paradram
