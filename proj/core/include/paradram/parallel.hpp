#pragma once

#include <barrier>
#include <cstdint>
#include <exception>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "paradram/kernel.hpp"
#include "paradram/refine.hpp"

namespace paradram {

/// Accepted states credited to each fork-join worker rank (index 0 = rank 1).
struct ContributionTally {
  std::uint32_t workerCount = 1;
  std::vector<std::uint64_t> counts;

  std::uint64_t total() const noexcept;
  static ContributionTally from_chain(const CompactChain& chain, std::uint32_t workerCount);
};

struct GeometricFit {
  double p = 1.0;
  bool degenerate = false;  // every contribution came from rank 1
};

/// Maximum-likelihood p of the geometric law truncated to ranks 1..P:
/// P(rank = r) = p (1-p)^(r-1) / (1 - (1-p)^P).
GeometricFit fit_geometric(const ContributionTally& tally);

/// Work-normalized speedup of the round protocol, (1 - (1-p)^P) / p.
double predict_speedup(double p, std::uint64_t workers);

/// Smallest P whose predicted speedup reaches (1 - efficiencyFloor) of the
/// 1/p ceiling, capped at 2^16.
std::uint64_t recommend_workers(double p, double efficiencyFloor = 0.05);

struct SpeedupReport {
  double fittedAcceptanceProb = 1.0;
  std::vector<std::pair<std::uint64_t, double>> predictedCurve;
  std::uint64_t recommendedP = 1;
  std::optional<double> observedSpeedup;
};

/// Prediction table over P = 1, 2, 4, ..., maxWorkers.
SpeedupReport make_speedup_report(double p, std::uint64_t maxWorkers = 4096,
                                  std::optional<double> observedSpeedup = std::nullopt);

/// Fixed set of threads that run a batch of indexed tasks per call and then
/// meet at a barrier. The calling thread is worker 0.
class WorkerPool {
 public:
  explicit WorkerPool(unsigned threads);
  ~WorkerPool();
  WorkerPool(const WorkerPool&) = delete;
  WorkerPool& operator=(const WorkerPool&) = delete;

  unsigned size() const noexcept { return threadCount_; }

  /// Calls task(i) for i in [0, count); blocks until all are done and rethrows
  /// the first failure.
  void run(std::size_t count, const std::function<void(std::size_t)>& task);

 private:
  void work_share(unsigned worker);

  unsigned threadCount_;
  std::barrier<> startLine_;
  std::barrier<> finishLine_;
  const std::function<void(std::size_t)>* task_ = nullptr;
  std::size_t count_ = 0;
  bool stopping_ = false;
  std::vector<std::exception_ptr> errors_;
  std::vector<std::jthread> threads_;
};

/// The fork-join round protocol: every rank makes one full attempt (all DR
/// stages) from the incumbent with stream RandomStream::for_round(seed, round,
/// rank); the lowest accepting rank wins. Results do not depend on the number
/// of threads.
class ForkJoinRounds final : public RoundStrategy {
 public:
  ForkJoinRounds(std::uint64_t seed, std::uint32_t workers, unsigned threads = 1, bool measureTime = false);

  RoundResult run_round(const TargetDensity& target, const ProposalState& proposal, const Point& x, double logX,
                        std::uint64_t round) override;
  void save(ByteWriter& out) const override;
  void load(ByteReader& in) override;

  const ContributionTally& tally() const noexcept { return tally_; }

  /// (serial seconds per accepted state) / (fork-join seconds per accepted
  /// state), with the serial cost inferred from the measured cost of a single
  /// attempt and the measured stage-0 acceptance. Empty unless timing is on.
  std::optional<double> observed_speedup() const;

 private:
  std::uint64_t seed_;
  std::uint32_t workers_;
  std::unique_ptr<WorkerPool> pool_;
  ContributionTally tally_;
  std::vector<StepOutcome> outcomes_;
  bool measureTime_;
  double roundSeconds_ = 0.0;
  std::vector<double> attemptSeconds_;
  std::uint64_t attempts_ = 0;
  std::uint64_t stage0Accepts_ = 0;
  std::uint64_t commits_ = 0;
};

struct ForkJoinResult {
  CompactChain chain;
  KernelSummary summary;
  ContributionTally tally;
  GeometricFit fit;
  SpeedupReport speedup;
};

struct ForkJoinOptions {
  unsigned threads = 1;
  bool measureTime = false;
};

/// Runs the fork-join protocol with `workers` ranks to completion in memory.
ForkJoinResult run_forkjoin(const TargetDensity& target, const KernelConfig& config, const ProposalState& proposal,
                            std::uint32_t workers, const ForkJoinOptions& options = {});

/// Speedup report for a finished fork-join run: p from the tally fit.
SpeedupReport forkjoin_speedup(const ContributionTally& tally, std::optional<double> observed = std::nullopt);

struct ChainOutcome {
  std::optional<CompactChain> chain;
  std::optional<KernelSummary> summary;
  std::optional<RefinedSample> refined;
  std::string failure;  // empty on success
};

struct MultiChainResult {
  std::vector<ChainOutcome> chains;
  ConvergenceReport convergence;
};

/// Independent samplers on streams RandomStream::for_chain(seed, i), rows
/// tagged with processId i+1; afterwards each chain is refined and all refined
/// samples are cross-checked. One chain failing does not stop the others.
MultiChainResult run_multichain(const TargetDensity& target, const KernelConfig& config,
                                const ProposalState& proposal, std::size_t chains, unsigned threads = 1);

}  // namespace paradram
