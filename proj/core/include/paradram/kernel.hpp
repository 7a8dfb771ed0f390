#pragma once

#include <cstdint>
#include <limits>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "paradram/chain.hpp"
#include "paradram/model.hpp"
#include "paradram/proposal.hpp"
#include "paradram/random.hpp"

namespace paradram {

class ByteWriter;
class ByteReader;

struct KernelConfig {
  std::uint64_t chainLengthTarget = 10000;  // unique (compact) states
  int drStageCount = 1;
  std::uint64_t adaptationPeriod = 100;  // unique states between adaptations
  std::uint64_t greedyAdaptationCount = 4;
  Point startPoint;
  std::uint64_t rngSeed = 0;

  /// max(10 d, 100)
  static std::uint64_t default_adaptation_period(int dimension) noexcept;

  void validate(int dimension) const;
};

inline constexpr int kRejected = -1;

struct StepOutcome {
  Point acceptedState;
  double acceptedLogFunc = 0.0;
  int acceptedAtStage = kRejected;
  std::uint32_t proposalsConsumed = 0;

  bool accepted() const noexcept { return acceptedAtStage != kRejected; }
};

/// Symmetric Metropolis rule: accept iff ln u < logCandidate - logCurrent.
bool mh_accept_stage0(double logCurrent, double logCandidate, double u);

/// Second-stage delayed-rejection test. alpha terms are first-stage
/// acceptance probabilities. logProposalRatio is ln q1(y2 -> y1) - ln q1(x -> y1);
/// it vanishes only when the first-stage proposal density is the same from
/// both ends (the kernel always supplies it).
bool dr_accept_stage1(double logX, double logY1, double logY2, double alpha1_y2y1, double alpha1_xy1, double u,
                      double logProposalRatio = 0.0);

/// ln of the delayed-rejection acceptance probability of path.back() given the
/// rejected chain x = path[0], y1, ..., y_{j-1}. Every stage proposes around
/// path[0], so each stage's own proposal density cancels and only the
/// earlier-stage densities and rejection factors remain.
double dr_log_acceptance(std::span<const Point> path, std::span<const double> logFuncs,
                         const ProposalState& proposal);

/// One full proposal attempt from x: stage 0 and then each DR stage until
/// acceptance. Every stage consumes d normals and one uniform.
StepOutcome attempt_step(const TargetDensity& target, const ProposalState& proposal, const Point& x, double logX,
                         RandomStream& stream);

/// Smallest verbose index whose logFunc is within d/2 of the running maximum.
std::uint64_t burnin_location(std::span<const double> logFuncs, std::span<const std::uint64_t> weights,
                              int dimension);

/// Incremental version of burnin_location. The answer only moves forward, so
/// a single cursor suffices.
class BurninTracker {
 public:
  explicit BurninTracker(int dimension = 1) : offset_(0.5 * dimension) {}

  void add_row(std::uint64_t verboseStart, double logFunc);
  std::uint64_t location() const noexcept { return rows_.empty() ? 0 : rows_[cursor_].first; }

 private:
  double offset_;
  double runningMax_ = -std::numeric_limits<double>::infinity();
  std::vector<std::pair<std::uint64_t, double>> rows_;
  std::size_t cursor_ = 0;
};

struct ProgressTick {
  std::uint64_t verboseLength = 0;
  std::uint64_t compactLength = 0;
  double meanAcceptanceRate = 0.0;
  double lastAdaptationMeasure = 0.0;
};

class Sampler;

/// Receives finalized rows in chain order. on_checkpoint marks a flush
/// boundary: every row handed over so far is part of the snapshot the sink
/// may take from the sampler.
class ChainSink {
 public:
  virtual ~ChainSink() = default;
  virtual void on_row(const ChainRow& row) = 0;
  virtual void on_progress(const ProgressTick&) {}
  virtual void on_checkpoint(const Sampler&) {}
};

/// Keeps every row in memory.
class MemorySink : public ChainSink {
 public:
  explicit MemorySink(int dimension) : chain_(dimension) {}
  void on_row(const ChainRow& row) override { chain_.append_or_increment(row); }
  void on_progress(const ProgressTick& tick) override { ticks_.push_back(tick); }
  const CompactChain& chain() const noexcept { return chain_; }
  CompactChain& chain() noexcept { return chain_; }
  const std::vector<ProgressTick>& ticks() const noexcept { return ticks_; }

 private:
  CompactChain chain_;
  std::vector<ProgressTick> ticks_;
};

struct RoundResult {
  std::optional<StepOutcome> accepted;
  std::uint32_t rank = 1;
  std::uint64_t stage0Attempts = 0;
  std::uint64_t stage0Accepts = 0;
};

/// Produces the outcome of one kernel iteration. Serial strategies make a
/// single attempt; the fork-join strategy makes one per worker.
class RoundStrategy {
 public:
  virtual ~RoundStrategy() = default;
  virtual RoundResult run_round(const TargetDensity& target, const ProposalState& proposal, const Point& x,
                                double logX, std::uint64_t round) = 0;
  virtual void save(ByteWriter& out) const = 0;
  virtual void load(ByteReader& in) = 0;
};

/// One stream for the whole run.
class ContinuousStreamRounds final : public RoundStrategy {
 public:
  explicit ContinuousStreamRounds(RandomStream stream, std::uint32_t processId = 1)
      : stream_(std::move(stream)), processId_(processId) {}
  RoundResult run_round(const TargetDensity& target, const ProposalState& proposal, const Point& x, double logX,
                        std::uint64_t round) override;
  void save(ByteWriter& out) const override;
  void load(ByteReader& in) override;
  const RandomStream& stream() const noexcept { return stream_; }

 private:
  RandomStream stream_;
  std::uint32_t processId_;
};

/// A fresh stream per iteration, RandomStream::for_round(seed, round, 1):
/// the serial equivalent of the fork-join protocol with one worker.
class PerRoundStreamRounds final : public RoundStrategy {
 public:
  explicit PerRoundStreamRounds(std::uint64_t seed) : seed_(seed) {}
  RoundResult run_round(const TargetDensity& target, const ProposalState& proposal, const Point& x, double logX,
                        std::uint64_t round) override;
  void save(ByteWriter&) const override {}
  void load(ByteReader&) override {}

 private:
  std::uint64_t seed_;
};

struct KernelSummary {
  std::uint64_t verboseLength = 0;
  std::uint64_t compactLength = 0;
  std::uint64_t rounds = 0;
  std::vector<std::uint64_t> stageAccepts;   // index = DR stage
  std::vector<double> stageAcceptanceRate;   // stageAccepts / rounds
  double meanAcceptanceRate = 0.0;           // compact / verbose
  std::uint64_t stage0Attempts = 0;          // over all workers
  std::uint64_t stage0Accepts = 0;
  double proposalAcceptanceRate = 0.0;       // stage0Accepts / stage0Attempts
  std::uint64_t burninLocation = 0;
  ProposalState finalProposal = ProposalState::initial(1, 0);
  std::vector<AdaptationRecord> adaptations;
  std::vector<Eigen::MatrixXd> covarianceHistory;  // effective proposal covariance after each adaptation
};

/// The adaptive delayed-rejection sampling loop with all of its state.
///
/// A Sampler is resumable: save() captures everything except the rows already
/// handed to the sink, and resume() rebuilds the rest from those rows. Running
/// a resumed sampler to completion yields exactly the rows an uninterrupted
/// run would have produced.
class Sampler {
 public:
  Sampler(const TargetDensity& target, KernelConfig config, ProposalState proposal,
          std::unique_ptr<RoundStrategy> rounds);

  static Sampler resume(const TargetDensity& target, KernelConfig config, std::unique_ptr<RoundStrategy> rounds,
                        ByteReader& snapshot, std::span<const ChainRow> writtenRows);

  /// Runs until the chain holds config.chainLengthTarget unique states, then
  /// hands the final row to the sink.
  void run(ChainSink& sink);

  bool finished() const noexcept { return finished_; }
  std::uint64_t rows_emitted() const noexcept { return rowsEmitted_; }
  const ProposalState& proposal() const noexcept { return proposal_; }
  const KernelConfig& config() const noexcept { return config_; }
  RoundStrategy& rounds() noexcept { return *rounds_; }
  const RoundStrategy& rounds() const noexcept { return *rounds_; }
  KernelSummary summary() const;

  void save(ByteWriter& out) const;

 private:
  void start(ChainSink& sink);
  void iterate(ChainSink& sink);
  void maybe_adapt();
  void emit_incumbent(ChainSink& sink);

  const TargetDensity* target_;
  KernelConfig config_;
  ProposalState proposal_;
  std::unique_ptr<RoundStrategy> rounds_;

  bool started_ = false;
  bool finished_ = false;
  ChainRow incumbent_;
  std::uint64_t incumbentStart_ = 0;
  double pendingMeasure_ = 0.0;
  RunningMoments moments_;        // finalized rows, weighted
  RunningMoments uniqueMoments_;  // every unique state once (greedy adaptation)
  BurninTracker burnin_;
  std::uint64_t verboseLength_ = 0;
  std::uint64_t compactLength_ = 0;
  std::uint64_t round_ = 0;
  std::uint64_t rowsEmitted_ = 0;
  std::uint64_t rowsAtCheckpoint_ = 0;
  std::uint64_t adaptationAttempts_ = 0;
  bool adaptedThisRound_ = false;
  std::vector<std::uint64_t> stageAccepts_;
  std::uint64_t stage0Attempts_ = 0;
  std::uint64_t stage0Accepts_ = 0;
  std::vector<AdaptationRecord> adaptations_;
  std::vector<Eigen::MatrixXd> covarianceHistory_;
};

/// Serial run on a continuous stream, collecting rows into `sink`.
KernelSummary run_kernel(const TargetDensity& target, const KernelConfig& config, const ProposalState& proposal,
                         RandomStream stream, ChainSink& sink);

}  // namespace paradram
