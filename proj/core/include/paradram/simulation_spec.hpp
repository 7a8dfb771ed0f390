#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <string_view>

#include "paradram/kernel.hpp"
#include "paradram/model.hpp"
#include "paradram/persist.hpp"
#include "paradram/proposal.hpp"

namespace paradram {

enum class ParallelMode { Serial, MultiChain, ForkJoin };

std::string_view to_string(ParallelMode mode) noexcept;
ParallelMode parse_parallel_mode(std::string_view text);

/// Everything a run depends on. Zero-valued adaptationPeriod and scaleFactor
/// mean "use the dimension-dependent default".
struct SimulationSpec {
  BuiltinTargetSpec target;
  KernelConfig kernel;
  double scaleFactor = 0.0;
  ParallelMode mode = ParallelMode::Serial;
  std::uint32_t count = 1;  // chains (multi-chain) or workers (fork-join)
  unsigned threads = 1;
  OutputSuite outputs;
  bool deterministicTestMode = false;
  bool forceOverwrite = false;

  SimulationSpec();

  /// Throws InvalidSpec (or BadDimension) naming the violated invariant.
  void validate() const;

  KernelConfig resolved_kernel() const;
  double resolved_scale_factor() const;
  ProposalState initial_proposal() const;

  /// Hash over the fields that shape the stochastic trajectory.
  std::uint64_t digest() const;
};

/// One user-settable field. The key doubles as the config-file key and the
/// long flag name, so the two input paths cannot drift apart.
struct SpecField {
  std::string_view key;
  std::string_view valueHint;  // empty for switches
  std::string_view description;
  bool inDigest;
  std::function<void(SimulationSpec&, std::string_view)> set;
  std::function<std::string(const SimulationSpec&)> get;

  bool is_switch() const noexcept { return valueHint.empty(); }
};

std::span<const SpecField> spec_fields();
const SpecField& find_spec_field(std::string_view key);

/// Applies `key = value` lines; blank lines and `#` comments are skipped.
void apply_config_text(SimulationSpec& spec, std::string_view text);
SimulationSpec parse_config_text(std::string_view text);

/// `key = value  # description`, one line per field in table order.
std::string echo_spec(const SimulationSpec& spec);

}  // namespace paradram
