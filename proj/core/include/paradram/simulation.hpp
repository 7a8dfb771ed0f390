#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "paradram/parallel.hpp"
#include "paradram/persist.hpp"
#include "paradram/refine.hpp"
#include "paradram/simulation_spec.hpp"

namespace paradram {

/// Test seams. afterRow runs once per chain row written, with the suite's
/// row count so far; throwing from it abandons the run the way a crash would
/// (whatever the file buffers hold is left behind).
struct SimulationHooks {
  std::function<void(std::uint64_t rowsWritten)> afterRow;
};

enum class RunDisposition { Completed, Resumed, Refused };
std::string_view to_string(RunDisposition d) noexcept;

/// Outcome of one output suite (the whole run, or one multi-chain member).
struct SuiteOutcome {
  OutputSuite suite;
  std::optional<CompactChain> chain;
  std::optional<KernelSummary> summary;  // empty for members finished by an earlier invocation
  std::optional<RefinedSample> refined;
  bool resumed = false;
  std::string failure;
};

struct SimulationResult {
  RunDisposition disposition = RunDisposition::Completed;
  std::vector<SuiteOutcome> suites;  // one per chain
  std::optional<ContributionTally> tally;
  std::optional<ConvergenceReport> convergence;
  std::optional<SpeedupReport> speedup;
};

/// Runs the spec to completion and writes its output suite. A previous
/// interrupted run with the same prefix is resumed; a completed one is left
/// alone (Refused) unless spec.forceOverwrite.
SimulationResult run_simulation(const SimulationSpec& spec, const SimulationHooks& hooks = {});

/// Whole-run state for a prefix, accounting for multi-chain member suites.
RunState detect_run_state(const SimulationSpec& spec);

}  // namespace paradram
