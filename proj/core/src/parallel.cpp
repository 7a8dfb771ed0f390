#include "paradram/parallel.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>

#include <boost/math/tools/toms748_solve.hpp>

#include "paradram/bytes.hpp"
#include "paradram/error.hpp"

namespace paradram {

namespace {

constexpr std::uint64_t kMaxRecommendedWorkers = 1ULL << 16;

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

}  // namespace

std::uint64_t ContributionTally::total() const noexcept {
  return std::accumulate(counts.begin(), counts.end(), std::uint64_t{0});
}

ContributionTally ContributionTally::from_chain(const CompactChain& chain, std::uint32_t workerCount) {
  ContributionTally tally;
  std::uint32_t highest = 1;
  for (const auto& row : chain.rows()) highest = std::max(highest, row.processId);
  tally.workerCount = std::max(workerCount, highest);
  tally.counts.assign(tally.workerCount, 0);
  // The first row is the start point, which no worker proposed.
  for (std::size_t i = 1; i < chain.rows().size(); ++i) ++tally.counts[chain.rows()[i].processId - 1];
  return tally;
}

GeometricFit fit_geometric(const ContributionTally& tally) {
  const std::uint64_t n = tally.total();
  if (n == 0) throw Error(ErrorCode::EmptySample, "geometric fit needs at least one contribution");
  double ranksAboveFirst = 0.0;  // sum of (r - 1) over contributions
  for (std::size_t r = 0; r < tally.counts.size(); ++r)
    ranksAboveFirst += static_cast<double>(r) * static_cast<double>(tally.counts[r]);
  if (ranksAboveFirst == 0.0) return {1.0, true};

  const double total = static_cast<double>(n);
  const double workers = static_cast<double>(tally.workerCount);
  // d/dp of the truncated log-likelihood.
  const auto score = [&](double p) {
    const double logQ = std::log1p(-p);
    const double tail = -std::expm1(workers * logQ);  // 1 - (1-p)^P
    return total / p - ranksAboveFirst / (1.0 - p) - total * workers * std::exp((workers - 1.0) * logQ) / tail;
  };
  double lo = 1e-12;
  double hi = 1.0 - 1e-15;
  const double scoreLo = score(lo);
  if (scoreLo <= 0.0) return {lo, false};
  const double scoreHi = score(hi);
  std::uintmax_t iterations = 200;
  const auto [a, b] = boost::math::tools::toms748_solve(
      score, lo, hi, scoreLo, scoreHi, [](double x, double y) { return std::abs(y - x) < 1e-10; }, iterations);
  return {0.5 * (a + b), false};
}

double predict_speedup(double p, std::uint64_t workers) {
  const double count = static_cast<double>(workers);
  if (p <= 0.0) return count;
  if (p >= 1.0) return 1.0;
  return -std::expm1(count * std::log1p(-p)) / p;
}

std::uint64_t recommend_workers(double p, double efficiencyFloor) {
  if (p >= 1.0) return 1;
  const double target = (1.0 - efficiencyFloor) / p;
  std::uint64_t workers = 1;
  while (workers < kMaxRecommendedWorkers && predict_speedup(p, workers) < target) ++workers;
  return workers;
}

SpeedupReport make_speedup_report(double p, std::uint64_t maxWorkers, std::optional<double> observedSpeedup) {
  SpeedupReport report;
  report.fittedAcceptanceProb = p;
  for (std::uint64_t workers = 1; workers <= maxWorkers; workers *= 2)
    report.predictedCurve.emplace_back(workers, predict_speedup(p, workers));
  report.recommendedP = recommend_workers(p);
  report.observedSpeedup = observedSpeedup;
  return report;
}

WorkerPool::WorkerPool(unsigned threads)
    : threadCount_(std::max(1U, threads)),
      startLine_(static_cast<std::ptrdiff_t>(threadCount_)),
      finishLine_(static_cast<std::ptrdiff_t>(threadCount_)),
      errors_(threadCount_) {
  for (unsigned t = 1; t < threadCount_; ++t) {
    threads_.emplace_back([this, t] {
      for (;;) {
        startLine_.arrive_and_wait();
        if (stopping_) return;
        work_share(t);
        finishLine_.arrive_and_wait();
      }
    });
  }
}

WorkerPool::~WorkerPool() {
  stopping_ = true;
  if (threadCount_ > 1) startLine_.arrive_and_wait();
}

void WorkerPool::work_share(unsigned worker) {
  for (std::size_t i = worker; i < count_; i += threadCount_) {
    try {
      (*task_)(i);
    } catch (...) {
      if (!errors_[worker]) errors_[worker] = std::current_exception();
    }
  }
}

void WorkerPool::run(std::size_t count, const std::function<void(std::size_t)>& task) {
  task_ = &task;
  count_ = count;
  std::fill(errors_.begin(), errors_.end(), nullptr);
  startLine_.arrive_and_wait();
  work_share(0);
  finishLine_.arrive_and_wait();
  for (const auto& error : errors_)
    if (error) std::rethrow_exception(error);
}

ForkJoinRounds::ForkJoinRounds(std::uint64_t seed, std::uint32_t workers, unsigned threads, bool measureTime)
    : seed_(seed),
      workers_(workers),
      pool_(std::make_unique<WorkerPool>(std::min<unsigned>(std::max(1U, threads), std::max(1U, workers)))),
      outcomes_(workers),
      measureTime_(measureTime),
      attemptSeconds_(workers, 0.0) {
  if (workers < 1) throw Error(ErrorCode::InvalidSpec, "fork-join needs at least one worker");
  tally_.workerCount = workers;
  tally_.counts.assign(workers, 0);
}

RoundResult ForkJoinRounds::run_round(const TargetDensity& target, const ProposalState& proposal, const Point& x,
                                      double logX, std::uint64_t round) {
  const auto roundStart = Clock::now();
  pool_->run(workers_, [&](std::size_t i) {
    RandomStream stream = RandomStream::for_round(seed_, round, static_cast<std::uint32_t>(i + 1));
    const auto t0 = measureTime_ ? Clock::now() : Clock::time_point{};
    outcomes_[i] = attempt_step(target, proposal, x, logX, stream);
    if (measureTime_) attemptSeconds_[i] += seconds_since(t0);
  });

  RoundResult result;
  result.stage0Attempts = workers_;
  for (std::uint32_t i = 0; i < workers_; ++i) {
    if (outcomes_[i].acceptedAtStage == 0) ++result.stage0Accepts;
    if (!result.accepted && outcomes_[i].accepted()) {
      result.accepted = outcomes_[i];
      result.rank = i + 1;
      ++tally_.counts[i];
    }
  }
  if (measureTime_) {
    roundSeconds_ += seconds_since(roundStart);
    attempts_ += workers_;
    stage0Accepts_ += result.stage0Accepts;
    if (result.accepted) ++commits_;
  }
  return result;
}

void ForkJoinRounds::save(ByteWriter& out) const {
  out.put<std::uint32_t>(workers_);
  out.put_list(tally_.counts);
}

void ForkJoinRounds::load(ByteReader& in) {
  const auto workers = in.get<std::uint32_t>();
  auto counts = in.get_list<std::uint64_t>();
  if (workers != workers_ || counts.size() != workers_)
    throw Error(ErrorCode::CorruptRestart, "snapshot worker count differs from the live configuration");
  tally_.counts = std::move(counts);
}

std::optional<double> ForkJoinRounds::observed_speedup() const {
  if (!measureTime_ || commits_ == 0 || stage0Accepts_ == 0 || roundSeconds_ <= 0.0) return std::nullopt;
  const double attemptTotal = std::accumulate(attemptSeconds_.begin(), attemptSeconds_.end(), 0.0);
  const double serialPerAccepted = attemptTotal / static_cast<double>(stage0Accepts_);
  const double forkJoinPerAccepted = roundSeconds_ / static_cast<double>(commits_);
  return serialPerAccepted / forkJoinPerAccepted;
}

SpeedupReport forkjoin_speedup(const ContributionTally& tally, std::optional<double> observed) {
  const double p = tally.total() == 0 ? 1.0 : fit_geometric(tally).p;
  return make_speedup_report(p, 4096, observed);
}

ForkJoinResult run_forkjoin(const TargetDensity& target, const KernelConfig& config, const ProposalState& proposal,
                            std::uint32_t workers, const ForkJoinOptions& options) {
  auto rounds = std::make_unique<ForkJoinRounds>(config.rngSeed, workers, options.threads, options.measureTime);
  const ForkJoinRounds& strategy = *rounds;
  Sampler sampler(target, config, proposal, std::move(rounds));
  MemorySink sink(target.dimension());
  sampler.run(sink);
  ForkJoinResult result{sink.chain(), sampler.summary(), strategy.tally(), {}, {}};
  result.fit = result.tally.total() == 0 ? GeometricFit{} : fit_geometric(result.tally);
  result.speedup = make_speedup_report(result.fit.p, 4096, strategy.observed_speedup());
  return result;
}

MultiChainResult run_multichain(const TargetDensity& target, const KernelConfig& config,
                                const ProposalState& proposal, std::size_t chains, unsigned threads) {
  if (chains < 1) throw Error(ErrorCode::InvalidSpec, "multi-chain mode needs at least one chain");
  MultiChainResult result;
  result.chains.resize(chains);
  WorkerPool pool(static_cast<unsigned>(std::min<std::size_t>(std::max(1U, threads), chains)));
  pool.run(chains, [&](std::size_t i) {
    ChainOutcome& outcome = result.chains[i];
    try {
      Sampler sampler(target, config, proposal,
                      std::make_unique<ContinuousStreamRounds>(RandomStream::for_chain(config.rngSeed, i),
                                                               static_cast<std::uint32_t>(i + 1)));
      MemorySink sink(target.dimension());
      sampler.run(sink);
      outcome.summary = sampler.summary();
      outcome.chain = sink.chain();
      outcome.refined = refine_two_phase(*outcome.chain);
    } catch (const std::exception& e) {
      outcome.failure = e.what();
    }
  });
  std::vector<RefinedSample> refined;
  for (const auto& c : result.chains)
    if (c.refined) refined.push_back(*c.refined);
  result.convergence = check_convergence(refined);
  return result;
}

}  // namespace paradram
