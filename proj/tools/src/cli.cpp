#include "paradram_cli/cli.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <map>
#include <optional>
#include <set>

#include <CLI11.hpp>

#include "paradram/error.hpp"
#include "paradram/parallel.hpp"
#include "paradram/persist.hpp"
#include "paradram/refine.hpp"
#include "paradram/report.hpp"
#include "paradram/simulation.hpp"

namespace paradram::cli {

namespace fs = std::filesystem;

namespace {

/// Raw `run` inputs before they are folded into a SimulationSpec.
struct RunInputs {
  std::string configPath;
  std::map<std::string, std::string> values;
  std::map<std::string, CLI::Option*> options;
};

void add_run_options(CLI::App& app, RunInputs& in) {
  app.add_option("--config", in.configPath, "key = value file; flags given on the command line take precedence")
      ->check(CLI::ExistingFile);
  for (const auto& field : spec_fields()) {
    const std::string name = "--" + std::string(field.key);
    const std::string help = std::string(field.description);
    auto& slot = in.values[std::string(field.key)];
    CLI::Option* opt = field.is_switch() ? app.add_flag(name, help)
                                         : app.add_option(name, slot, help)->type_name(std::string(field.valueHint));
    in.options[std::string(field.key)] = opt;
  }
}

SimulationSpec to_spec(const RunInputs& in) {
  SimulationSpec spec;
  if (!in.configPath.empty()) apply_config_text(spec, read_text_file(in.configPath));
  for (const auto& field : spec_fields()) {
    const std::string key(field.key);
    if (in.options.at(key)->count() == 0) continue;
    field.set(spec, field.is_switch() ? std::string_view("true") : std::string_view(in.values.at(key)));
  }
  return spec;
}

bool is_config_error(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidSpec:
    case ErrorCode::BadDimension:
    case ErrorCode::DimensionMismatch:
    case ErrorCode::NotPositiveDefinite:
    case ErrorCode::NonFiniteStart:
    case ErrorCode::SpecMismatch:
      return true;
    default:
      return false;
  }
}

int cmd_run(const RunInputs& in, std::ostream& out, std::ostream& err) {
  SimulationSpec spec;
  try {
    spec = to_spec(in);
    spec.validate();
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return kExitConfigError;
  }
  try {
    const SimulationResult result = run_simulation(spec);
    if (result.disposition == RunDisposition::Refused) {
      err << "error: '" << spec.outputs.prefix.string()
          << "' holds a completed run; pass --force-overwrite to replace it\n";
      return kExitRefused;
    }
    out << "status = " << to_string(result.disposition) << '\n';
    for (const auto& s : result.suites) {
      if (!s.failure.empty()) out << "failed " << s.suite.prefix.string() << ": " << s.failure << '\n';
      else out << "chain = " << s.suite.chain_path().string() << '\n';
    }
    out << "report = " << spec.outputs.report_path().string() << '\n';
    if (result.convergence) out << "converged = " << (result.convergence->passed ? "yes" : "no") << '\n';
    return kExitOk;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return is_config_error(e.code()) ? kExitConfigError : kExitRuntimeError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitRuntimeError;
  }
}

int cmd_refine(const std::string& chainPath, const std::string& outPath, std::ostream& out) {
  const ChainFile file = read_chain_file(chainPath);
  const RefinedSample refined = refine_two_phase(file.chain);
  write_sample(outPath, refined, file.chain.variable_names(), file.delimiter);
  out << "source_verbose_length = " << refined.sourceVerboseLength << '\n';
  out << "# round phase iac kept\n";
  for (std::size_t k = 0; k < refined.rounds.size(); ++k) {
    const auto& r = refined.rounds[k];
    out << "refinement_round " << k + 1 << ' ' << r.phase << ' ' << format_real(r.iacAggregate) << ' ' << r.keptCount
        << '\n';
  }
  out << "refined_sample_size = " << refined.points.size() << '\n';
  return kExitOk;
}

/// Distinct contributing ranks, ignoring the start row.
std::set<std::uint32_t> contributing_ranks(const CompactChain& chain) {
  std::set<std::uint32_t> ranks;
  for (std::size_t i = 1; i < chain.rows().size(); ++i) ranks.insert(chain.rows()[i].processId);
  return ranks;
}

int cmd_predict(const std::string& chainPath, std::uint64_t maxP, std::uint32_t workers, std::ostream& out,
                std::ostream& err) {
  const CompactChain chain = read_chain(chainPath);
  if (chain.empty()) {
    err << "error: chain has no rows to estimate acceptance from\n";
    return kExitConfigError;
  }
  double p = 0.0;
  std::string source;
  const auto ranks = contributing_ranks(chain);
  if (workers > 0 || ranks.size() > 1) {
    const std::uint32_t P = workers > 0 ? workers : *ranks.rbegin();
    const auto tally = ContributionTally::from_chain(chain, P);
    if (tally.total() == 0) {
      err << "error: chain has no accepted states to fit\n";
      return kExitConfigError;
    }
    p = fit_geometric(tally).p;
    source = "geometric fit of the contribution tally (P = " + std::to_string(tally.workerCount) + ")";
  } else {
    p = chain.rows().back().meanAcceptanceRate;
    source = "chain acceptance rate";
  }
  const SpeedupReport report = make_speedup_report(p, maxP);
  out << "acceptance_probability = " << format_real(p) << '\n';
  out << "source = " << source << '\n';
  out << "# speedup <P> <predicted speedup>\n";
  for (const auto& [P, s] : report.predictedCurve) out << "speedup " << P << ' ' << format_real(s) << '\n';
  out << "recommended_workers = " << report.recommendedP << '\n';
  return kExitOk;
}

fs::path find_chain_file(const fs::path& prefix) {
  for (auto format : {ChainFormat::Ascii, ChainFormat::Binary}) {
    OutputSuite suite{prefix, format, ','};
    if (fs::exists(suite.chain_path())) return suite.chain_path();
  }
  throw Error(ErrorCode::IoFailure, "no chain file for prefix " + prefix.string());
}

std::string load_report(const fs::path& prefix) {
  const OutputSuite suite{prefix, ChainFormat::Ascii, ','};
  if (!fs::exists(suite.report_path())) throw Error(ErrorCode::IoFailure, "no report for prefix " + prefix.string());
  return read_text_file(suite.report_path());
}

int cmd_export(const std::string& prefix, const std::string& figure, const std::string& outPath, std::ostream& out,
               std::ostream& err) {
  std::string csv;
  if (figure == "adaptation") {
    const CompactChain chain = read_chain(find_chain_file(prefix));
    csv = "verboseIndex,adaptationMeasure\n";
    std::uint64_t start = 0;
    for (const auto& row : chain.rows()) {
      csv += std::to_string(start) + "," + format_real(row.adaptationMeasure) + "\n";
      start += row.weight;
    }
  } else if (figure == "covariance") {
    const auto rows = report_table(load_report(prefix), "covariance_history");
    if (rows.empty()) {
      err << "error: the report has no covariance history (no adaptation happened)\n";
      return kExitConfigError;
    }
    csv = "adaptationIndex,i,j,value\n";
    for (const auto& r : rows) csv += r.at(0) + "," + r.at(1) + "," + r.at(2) + "," + r.at(3) + "\n";
  } else if (figure == "contributions") {
    const std::string report = load_report(prefix);
    if (report_value(report, "mode") != "forkjoin") {
      err << "error: contributions are only recorded by fork-join runs\n";
      return kExitConfigError;
    }
    const auto P = static_cast<std::uint32_t>(std::stoul(report_value(report, "count").value()));
    const auto tally = ContributionTally::from_chain(read_chain(find_chain_file(prefix)), P);
    const double p = tally.total() == 0 ? 1.0 : fit_geometric(tally).p;
    const double norm = -std::expm1(static_cast<double>(P) * std::log1p(-std::min(p, 1.0 - 1e-300)));
    csv = "rank,count,fittedProbability\n";
    for (std::uint32_t r = 1; r <= P; ++r) {
      const double prob = p >= 1.0 ? (r == 1 ? 1.0 : 0.0) : p * std::pow(1.0 - p, r - 1) / norm;
      csv += std::to_string(r) + "," + std::to_string(tally.counts[r - 1]) + "," + format_real(prob) + "\n";
    }
  } else if (figure == "scaling") {
    const std::string report = load_report(prefix);
    const auto rows = report_table(report, "speedup");
    if (rows.empty()) {
      err << "error: the report has no speedup table\n";
      return kExitConfigError;
    }
    const auto observed = report_value(report, "observed_speedup");
    const auto workers = report_value(report, "count");
    csv = "P,predictedSpeedup,observedSpeedup\n";
    for (const auto& r : rows) {
      const bool here = observed && workers && report_value(report, "mode") == "forkjoin" && r.at(0) == *workers;
      csv += r.at(0) + "," + r.at(1) + "," + (here ? *observed : "") + "\n";
    }
  } else {
    err << "error: figure must be adaptation, covariance, contributions or scaling\n";
    return kExitConfigError;
  }
  write_text_file(outPath, csv);
  out << "wrote " << outPath << '\n';
  return kExitOk;
}

/// Errors from reading user-supplied files are input errors (exit 1).
template <typename F>
int guarded(F&& body, std::ostream& err) {
  try {
    return body();
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitConfigError;
  }
}

struct Parsed {
  CLI::App app{"Adaptive delayed-rejection Metropolis sampler", "paradram"};
  CLI::App* run = nullptr;
  CLI::App* refine = nullptr;
  CLI::App* predict = nullptr;
  CLI::App* exportCmd = nullptr;
  RunInputs runInputs;
  std::string chainPath;
  std::string outPath;
  std::string predictChain;
  std::uint64_t maxP = 4096;
  std::uint32_t workers = 0;
  std::string prefix;
  std::string figure;
  std::string exportOut;

  Parsed() {
    app.require_subcommand(1);
    run = app.add_subcommand("run", "run a simulation (resumes an interrupted one with the same --out)");
    add_run_options(*run, runInputs);
    run->footer("Exit codes: 0 success, 1 configuration error, 2 runtime error, 3 refused to overwrite a completed run.");

    refine = app.add_subcommand("refine", "refine an existing chain file into a decorrelated sample");
    refine->add_option("chain", chainPath, "chain file (ascii or binary)")->required();
    refine->add_option("out", outPath, "sample file to write")->required();

    predict = app.add_subcommand("predict", "predict fork-join speedup from a chain file");
    predict->add_option("chain", predictChain, "chain file (ascii or binary)")->required();
    predict->add_option("--max-p", maxP, "largest worker count in the table (powers of two)")->capture_default_str();
    predict->add_option("--workers", workers, "worker count of a fork-join chain (default: highest rank seen)");

    exportCmd = app.add_subcommand("export-plotdata", "write plot-ready CSV from a finished run");
    exportCmd->add_option("prefix", prefix, "output prefix of the run")->required();
    exportCmd->add_option("figure", figure, "adaptation | covariance | contributions | scaling")
        ->required()
        ->check(CLI::IsMember({"adaptation", "covariance", "contributions", "scaling"}));
    exportCmd->add_option("out", exportOut, "CSV file to write")->required();
  }
};

std::vector<std::string> reversed_for_cli11(const std::vector<std::string>& args) {
  return {args.rbegin(), args.rend()};
}

}  // namespace

SimulationSpec spec_from_run_args(const std::vector<std::string>& args) {
  Parsed p;
  std::vector<std::string> full = {"run"};
  full.insert(full.end(), args.begin(), args.end());
  auto reversed = reversed_for_cli11(full);
  p.app.parse(reversed);
  return to_spec(p.runInputs);
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  Parsed p;
  try {
    auto reversed = reversed_for_cli11(args);
    p.app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = p.app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitConfigError;
  }
  if (p.run->parsed()) return cmd_run(p.runInputs, out, err);
  if (p.refine->parsed()) return guarded([&] { return cmd_refine(p.chainPath, p.outPath, out); }, err);
  if (p.predict->parsed())
    return guarded([&] { return cmd_predict(p.predictChain, p.maxP, p.workers, out, err); }, err);
  return guarded([&] { return cmd_export(p.prefix, p.figure, p.exportOut, out, err); }, err);
}

}  // namespace paradram::cli
