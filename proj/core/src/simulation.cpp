#include "paradram/simulation.hpp"

#include <chrono>
#include <filesystem>
#include <fstream>

#include "paradram/bytes.hpp"
#include "paradram/error.hpp"
#include "paradram/report.hpp"

namespace paradram {

namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

/// Streams rows and progress to the suite's files and snapshots at every
/// checkpoint the sampler announces.
class FileSink final : public ChainSink {
 public:
  FileSink(const OutputSuite& suite, std::uint64_t digest, bool timed, const SimulationHooks& hooks,
           CompactChain chain, std::unique_ptr<ChainWriter> writer, std::uint64_t progressBytes)
      : suite_(suite),
        digest_(digest),
        timed_(timed),
        hooks_(hooks),
        chain_(std::move(chain)),
        writer_(std::move(writer)),
        rowsWritten_(chain_.size()),
        progressBytes_(progressBytes),
        started_(Clock::now()) {
    progress_.open(suite_.progress_path(), std::ios::binary | std::ios::app);
    if (!progress_) throw Error(ErrorCode::IoFailure, "cannot open " + suite_.progress_path().string());
  }

  void on_row(const ChainRow& row) override {
    writer_->write(row);
    chain_.append_or_increment(row);
    ++rowsWritten_;
    if (hooks_.afterRow) hooks_.afterRow(rowsWritten_);
  }

  void on_progress(const ProgressTick& tick) override {
    std::optional<double> elapsed;
    if (timed_) elapsed = std::chrono::duration<double>(Clock::now() - started_).count();
    const std::string line = format_progress(tick, elapsed, suite_.delimiter) + "\n";
    progress_.write(line.data(), static_cast<std::streamsize>(line.size()));
    progressBytes_ += line.size();
  }

  void on_checkpoint(const Sampler& sampler) override {
    writer_->flush();
    progress_.flush();
    if (!progress_) throw Error(ErrorCode::IoFailure, "progress write failed");
    RestartSnapshot snap;
    snap.specDigest = digest_;
    snap.delimiter = suite_.delimiter;
    snap.chainBytes = writer_->bytes_written();
    snap.rowsWritten = rowsWritten_;
    snap.progressBytes = progressBytes_;
    ByteWriter state;
    sampler.save(state);
    snap.samplerState = std::move(state).take();
    write_snapshot(suite_.restart_path(), snap);
  }

  CompactChain& chain() noexcept { return chain_; }

 private:
  const OutputSuite& suite_;
  std::uint64_t digest_;
  bool timed_;
  const SimulationHooks& hooks_;
  CompactChain chain_;
  std::unique_ptr<ChainWriter> writer_;
  std::ofstream progress_;
  std::uint64_t rowsWritten_;
  std::uint64_t progressBytes_;
  Clock::time_point started_;
};

void truncate_progress(const fs::path& path, std::uint64_t bytes) {
  std::error_code ec;
  if (!fs::exists(path) || fs::file_size(path) < bytes)
    throw Error(ErrorCode::CorruptRestart, "progress file shorter than its snapshot: " + path.string());
  fs::resize_file(path, bytes, ec);
  if (ec) throw Error(ErrorCode::IoFailure, "cannot truncate " + path.string());
}

struct SuiteRun {
  CompactChain chain;
  KernelSummary summary;
  bool resumed = false;
  std::unique_ptr<Sampler> sampler;
};

/// Runs (or resumes) one sampler writing into `suite`.
SuiteRun run_suite(OutputSuite suite, const SimulationSpec& spec, const TargetDensity& target,
                   std::unique_ptr<RoundStrategy> rounds, RunState state, const SimulationHooks& hooks) {
  const std::uint64_t digest = spec.digest();
  const KernelConfig config = spec.resolved_kernel();
  const bool timed = !spec.deterministicTestMode;

  std::unique_ptr<Sampler> sampler;
  std::unique_ptr<FileSink> sink;
  if (state == RunState::Restartable) {
    const RestartSnapshot snap = read_snapshot(suite.restart_path());
    if (snap.specDigest != digest)
      throw Error(ErrorCode::SpecMismatch, "the settings differ from those of the interrupted run at '" +
                                               suite.prefix.string() + "'");
    suite.delimiter = snap.delimiter;
    auto writer = std::make_unique<ChainWriter>(suite.chain_path(), suite.format, suite.delimiter, snap.chainBytes);
    ChainFile existing = read_chain_file(suite.chain_path());
    if (existing.chain.size() != snap.rowsWritten)
      throw Error(ErrorCode::CorruptRestart, "chain file row count disagrees with the restart snapshot");
    truncate_progress(suite.progress_path(), snap.progressBytes);
    ByteReader in(snap.samplerState);
    sampler = std::make_unique<Sampler>(
        Sampler::resume(target, config, std::move(rounds), in, existing.chain.rows()));
    sink = std::make_unique<FileSink>(suite, digest, timed, hooks, std::move(existing.chain), std::move(writer),
                                      snap.progressBytes);
  } else {
    CompactChain chain(target.dimension());
    auto writer = std::make_unique<ChainWriter>(suite.chain_path(), suite.format, suite.delimiter,
                                                chain.variable_names());
    write_text_file(suite.progress_path(), progress_header(suite.delimiter) + "\n");
    const std::uint64_t progressBytes = fs::file_size(suite.progress_path());
    sampler = std::make_unique<Sampler>(target, config, spec.initial_proposal(), std::move(rounds));
    sink = std::make_unique<FileSink>(suite, digest, timed, hooks, std::move(chain), std::move(writer),
                                      progressBytes);
  }
  sampler->run(*sink);
  return {std::move(sink->chain()), sampler->summary(), state == RunState::Restartable, std::move(sampler)};
}

// Very short runs still get a (possibly empty) sample file.
RefinedSample refine_or_empty(const CompactChain& chain) {
  try {
    return refine_two_phase(chain);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::SeriesTooShort) throw;
    RefinedSample empty;
    empty.dimension = chain.dimension();
    empty.sourceVerboseLength = chain.verbose_length();
    return empty;
  }
}

SpeedupReport serial_speedup(const KernelSummary& summary) {
  return make_speedup_report(attempt_acceptance_rate(summary));
}

void write_suite_outputs(const OutputSuite& suite, const CompactChain& chain, const RefinedSample& refined,
                         const ReportContent& report) {
  write_sample(suite.sample_path(), refined, chain.variable_names(), suite.delimiter);
  write_text_file(suite.report_path(), format_report(report));
}

std::unique_ptr<RoundStrategy> member_rounds(const SimulationSpec& spec, std::size_t index) {
  return std::make_unique<ContinuousStreamRounds>(RandomStream::for_chain(spec.kernel.rngSeed, index),
                                                  static_cast<std::uint32_t>(index + 1));
}

SimulationResult run_single(const SimulationSpec& spec, const TargetDensity& target, RunState state,
                            const SimulationHooks& hooks) {
  SimulationResult result;
  std::unique_ptr<RoundStrategy> rounds;
  if (spec.mode == ParallelMode::ForkJoin)
    rounds = std::make_unique<ForkJoinRounds>(spec.kernel.rngSeed, spec.count, spec.threads,
                                              !spec.deterministicTestMode);
  else
    rounds = member_rounds(spec, 0);

  SuiteRun run = run_suite(spec.outputs, spec, target, std::move(rounds), state, hooks);
  SuiteOutcome outcome;
  outcome.suite = spec.outputs;
  outcome.resumed = run.resumed;
  outcome.refined = refine_or_empty(run.chain);

  ReportContent report;
  report.spec = &spec;
  report.scope = std::string(to_string(spec.mode));
  report.summary = &run.summary;
  report.refined = &*outcome.refined;
  if (spec.mode == ParallelMode::ForkJoin) {
    const auto& strategy = dynamic_cast<const ForkJoinRounds&>(run.sampler->rounds());
    result.tally = strategy.tally();
    result.speedup = forkjoin_speedup(*result.tally, strategy.observed_speedup());
    report.tally = result.tally;
    report.speedupSource = "geometric fit of the contribution tally";
  } else {
    result.speedup = serial_speedup(run.summary);
    report.speedupSource = "measured attempt acceptance rate";
  }
  report.speedup = result.speedup;
  write_suite_outputs(spec.outputs, run.chain, *outcome.refined, report);

  outcome.chain = std::move(run.chain);
  outcome.summary = std::move(run.summary);
  result.suites.push_back(std::move(outcome));
  result.disposition = result.suites.front().resumed ? RunDisposition::Resumed : RunDisposition::Completed;
  return result;
}

SimulationResult run_members(const SimulationSpec& spec, const TargetDensity& target, const SimulationHooks& hooks) {
  SimulationResult result;
  result.suites.resize(spec.count);
  WorkerPool pool(std::min<unsigned>(spec.threads, spec.count));
  pool.run(spec.count, [&](std::size_t i) {
    SuiteOutcome& outcome = result.suites[i];
    outcome.suite = spec.outputs.member(i);
    try {
      const RunState state = detect_incomplete(outcome.suite);
      if (state == RunState::Complete) {
        if (read_snapshot(outcome.suite.restart_path()).specDigest != spec.digest())
          throw Error(ErrorCode::SpecMismatch, "finished chain was produced with different settings");
        outcome.chain = read_chain(outcome.suite.chain_path());
        outcome.refined = refine_or_empty(*outcome.chain);
        outcome.resumed = true;
        return;
      }
      SuiteRun run = run_suite(outcome.suite, spec, target, member_rounds(spec, i), state, hooks);
      outcome.resumed = run.resumed;
      outcome.refined = refine_or_empty(run.chain);
      ReportContent report;
      report.spec = &spec;
      report.scope = "multichain member " + std::to_string(i + 1) + " of " + std::to_string(spec.count);
      report.summary = &run.summary;
      report.refined = &*outcome.refined;
      report.speedup = serial_speedup(run.summary);
      report.speedupSource = "measured attempt acceptance rate";
      write_suite_outputs(outcome.suite, run.chain, *outcome.refined, report);
      outcome.chain = std::move(run.chain);
      outcome.summary = std::move(run.summary);
    } catch (const Error& e) {
      outcome.failure = e.what();
    }
  });

  std::vector<RefinedSample> refined;
  ReportContent report;
  report.spec = &spec;
  report.scope = "multichain";
  bool anyResumed = false;
  for (std::size_t i = 0; i < result.suites.size(); ++i) {
    const auto& s = result.suites[i];
    anyResumed = anyResumed || s.resumed;
    if (s.refined && !s.refined->points.empty()) refined.push_back(*s.refined);
    if (!s.failure.empty()) report.failures.push_back("chain " + std::to_string(i + 1) + ": " + s.failure);
  }
  result.convergence = check_convergence(refined);
  report.convergence = result.convergence;
  write_text_file(spec.outputs.report_path(), format_report(report));
  result.disposition = anyResumed ? RunDisposition::Resumed : RunDisposition::Completed;
  return result;
}

}  // namespace

std::string_view to_string(RunDisposition d) noexcept {
  switch (d) {
    case RunDisposition::Completed: return "completed";
    case RunDisposition::Resumed: return "resumed";
    case RunDisposition::Refused: return "refused";
  }
  return "completed";
}

RunState detect_run_state(const SimulationSpec& spec) {
  if (spec.mode != ParallelMode::MultiChain) return detect_incomplete(spec.outputs);
  // The top level of a multi-chain run only has a report, written last.
  const auto& top = spec.outputs;
  if (fs::exists(top.report_path()) && read_text_file(top.report_path()).ends_with(std::string(kReportTerminator) + "\n"))
    return RunState::Complete;
  bool any = fs::exists(top.report_path());
  for (std::uint32_t i = 0; i < spec.count && !any; ++i) any = detect_incomplete(top.member(i)) != RunState::Fresh;
  return any ? RunState::Restartable : RunState::Fresh;
}

SimulationResult run_simulation(const SimulationSpec& spec, const SimulationHooks& hooks) {
  spec.validate();
  const TargetDensity target = make_builtin_target(spec.target);

  RunState state = spec.forceOverwrite ? RunState::Fresh : detect_run_state(spec);
  if (state == RunState::Complete) return {RunDisposition::Refused, {}, {}, {}, {}};
  if (state == RunState::Fresh) {
    if (const auto dir = spec.outputs.prefix.parent_path(); !dir.empty()) {
      std::error_code ec;
      std::filesystem::create_directories(dir, ec);
    }
    remove_suite(spec.outputs);
    if (spec.mode == ParallelMode::MultiChain)
      for (std::uint32_t i = 0; i < spec.count; ++i) remove_suite(spec.outputs.member(i));
    state = RunState::Fresh;
  }
  if (spec.mode == ParallelMode::MultiChain) return run_members(spec, target, hooks);
  return run_single(spec, target, state, hooks);
}

}  // namespace paradram
