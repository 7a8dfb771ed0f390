#pragma once

#include <ostream>
#include <string>
#include <vector>

#include "paradram/simulation_spec.hpp"

namespace paradram::cli {

enum ExitCode : int {
  kExitOk = 0,
  kExitConfigError = 1,
  kExitRuntimeError = 2,
  kExitRefused = 3,
};

/// Entry point shared by the executable and the tests. args excludes the
/// program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// The spec a `run` invocation would execute: config file first, then flags.
SimulationSpec spec_from_run_args(const std::vector<std::string>& args);

}  // namespace paradram::cli
