#include "paradram/kernel.hpp"

#include <algorithm>
#include <cmath>

#include "paradram/bytes.hpp"
#include "paradram/error.hpp"

namespace paradram {

namespace {

constexpr std::uint64_t kProgressCadence = 1000;
constexpr std::uint64_t kRowsPerCheckpoint = 1000;

// ln q_step(from -> to) up to the normalizing constant, which cancels because
// the same steps appear on both sides of every delayed-rejection ratio.
double log_proposal_kernel(const ProposalState& proposal, int step, const Point& from, const Point& to) {
  const double scale = proposal.effective_scale(step - 1);
  const Eigen::VectorXd white = proposal.chol_factor().triangularView<Eigen::Lower>().solve(to - from);
  return -0.5 * white.squaredNorm() / (scale * scale);
}

// ln alpha_j(p0; p1..pj) over the index path `idx` into points/logs.
double log_alpha(const std::vector<std::size_t>& idx, std::span<const Point> points, std::span<const double> logs,
                 const ProposalState& proposal) {
  const std::size_t j = idx.size() - 1;
  const double logFirst = logs[idx.front()];
  const double logLast = logs[idx.back()];
  if (logLast == kMinusInfinity) return kMinusInfinity;
  if (j == 1) return std::min(0.0, logLast - logFirst);

  double numerator = logLast;
  double denominator = logFirst;
  for (std::size_t i = 1; i < j; ++i) {
    std::vector<std::size_t> reverse;
    for (std::size_t k = 0; k <= i; ++k) reverse.push_back(idx[j - k]);
    const double logAlphaReverse = log_alpha(reverse, points, logs, proposal);
    if (logAlphaReverse == 0.0) return kMinusInfinity;
    numerator += log_proposal_kernel(proposal, static_cast<int>(i), points[idx[j]], points[idx[j - i]]) +
                 std::log1p(-std::exp(logAlphaReverse));

    std::vector<std::size_t> forward(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(i) + 1);
    const double logAlphaForward = log_alpha(forward, points, logs, proposal);
    denominator += log_proposal_kernel(proposal, static_cast<int>(i), points[idx[0]], points[idx[i]]) +
                   std::log1p(-std::exp(logAlphaForward));
  }
  return std::min(0.0, numerator - denominator);
}

}  // namespace

std::uint64_t KernelConfig::default_adaptation_period(int dimension) noexcept {
  return std::max<std::uint64_t>(10ULL * static_cast<std::uint64_t>(dimension), 100ULL);
}

void KernelConfig::validate(int dimension) const {
  if (chainLengthTarget < 1) throw Error(ErrorCode::InvalidSpec, "chain length target must be at least 1");
  if (adaptationPeriod < 1) throw Error(ErrorCode::InvalidSpec, "adaptation period must be at least 1");
  if (drStageCount < 0) throw Error(ErrorCode::InvalidSpec, "delayed-rejection stage count must be >= 0");
  if (startPoint.size() != dimension)
    throw Error(ErrorCode::DimensionMismatch, "start point has " + std::to_string(startPoint.size()) +
                                                  " components, expected " + std::to_string(dimension));
  if (!startPoint.allFinite()) throw Error(ErrorCode::NonFiniteStart, "start point has non-finite components");
}

bool mh_accept_stage0(double logCurrent, double logCandidate, double u) {
  return std::log(u) < logCandidate - logCurrent;
}

bool dr_accept_stage1(double logX, double /*logY1*/, double logY2, double alpha1_y2y1, double alpha1_xy1, double u,
                      double logProposalRatio) {
  const auto valid = [](double a) { return a >= 0.0 && a <= 1.0; };
  if (!valid(alpha1_y2y1) || !valid(alpha1_xy1))
    throw Error(ErrorCode::InvalidAlpha, "first-stage acceptance probabilities must lie in [0, 1]");
  if (alpha1_y2y1 == 1.0 || logY2 == kMinusInfinity) return false;
  const double numerator = logY2 + std::log1p(-alpha1_y2y1) + logProposalRatio;
  const double denominator = logX + std::log1p(-alpha1_xy1);
  return std::log(u) < numerator - denominator;
}

double dr_log_acceptance(std::span<const Point> path, std::span<const double> logFuncs,
                         const ProposalState& proposal) {
  if (path.size() < 2 || path.size() != logFuncs.size())
    throw Error(ErrorCode::DimensionMismatch, "delayed-rejection path needs at least two points");
  if (static_cast<int>(path.size()) - 2 > proposal.dr_stage_count())
    throw Error(ErrorCode::StageOutOfRange, "path is longer than the configured delayed-rejection stages");
  std::vector<std::size_t> idx(path.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  return log_alpha(idx, path, logFuncs, proposal);
}

StepOutcome attempt_step(const TargetDensity& target, const ProposalState& proposal, const Point& x, double logX,
                         RandomStream& stream) {
  std::vector<Point> path{x};
  std::vector<double> logs{logX};
  StepOutcome out;
  for (int stage = 0; stage <= proposal.dr_stage_count(); ++stage) {
    Point candidate = sample_candidate(proposal, x, stage, stream);
    const double u = stream.uniform();
    const double logCandidate = target(candidate);
    ++out.proposalsConsumed;
    path.push_back(std::move(candidate));
    logs.push_back(logCandidate);
    const bool accept = stage == 0 ? mh_accept_stage0(logX, logCandidate, u)
                                   : std::log(u) < dr_log_acceptance(path, logs, proposal);
    if (accept) {
      out.acceptedState = path.back();
      out.acceptedLogFunc = logCandidate;
      out.acceptedAtStage = stage;
      return out;
    }
  }
  out.acceptedState = x;
  out.acceptedLogFunc = logX;
  return out;
}

std::uint64_t burnin_location(std::span<const double> logFuncs, std::span<const std::uint64_t> weights,
                              int dimension) {
  if (logFuncs.empty()) throw Error(ErrorCode::EmptyRange, "burn-in location of an empty series");
  if (!weights.empty() && weights.size() != logFuncs.size())
    throw Error(ErrorCode::DimensionMismatch, "one weight per series element required");
  BurninTracker tracker(dimension);
  std::uint64_t start = 0;
  for (std::size_t i = 0; i < logFuncs.size(); ++i) {
    tracker.add_row(start, logFuncs[i]);
    start += weights.empty() ? 1 : weights[i];
  }
  return tracker.location();
}

void BurninTracker::add_row(std::uint64_t verboseStart, double logFunc) {
  rows_.emplace_back(verboseStart, logFunc);
  if (logFunc > runningMax_) {
    runningMax_ = logFunc;
    const double threshold = runningMax_ - offset_;
    while (rows_[cursor_].second < threshold) ++cursor_;
  }
}

RoundResult ContinuousStreamRounds::run_round(const TargetDensity& target, const ProposalState& proposal,
                                              const Point& x, double logX, std::uint64_t) {
  RoundResult result;
  StepOutcome step = attempt_step(target, proposal, x, logX, stream_);
  result.rank = processId_;
  result.stage0Attempts = 1;
  result.stage0Accepts = step.acceptedAtStage == 0 ? 1 : 0;
  if (step.accepted()) result.accepted = std::move(step);
  return result;
}

void ContinuousStreamRounds::save(ByteWriter& out) const { out.put_string(stream_.serialize()); }

void ContinuousStreamRounds::load(ByteReader& in) { stream_ = RandomStream::deserialize(in.get_string()); }

RoundResult PerRoundStreamRounds::run_round(const TargetDensity& target, const ProposalState& proposal,
                                            const Point& x, double logX, std::uint64_t round) {
  RandomStream stream = RandomStream::for_round(seed_, round, 1);
  RoundResult result;
  StepOutcome step = attempt_step(target, proposal, x, logX, stream);
  result.stage0Attempts = 1;
  result.stage0Accepts = step.acceptedAtStage == 0 ? 1 : 0;
  if (step.accepted()) result.accepted = std::move(step);
  return result;
}

Sampler::Sampler(const TargetDensity& target, KernelConfig config, ProposalState proposal,
                 std::unique_ptr<RoundStrategy> rounds)
    : target_(&target),
      config_(std::move(config)),
      proposal_(std::move(proposal)),
      rounds_(std::move(rounds)),
      moments_(target.dimension()),
      uniqueMoments_(target.dimension()),
      burnin_(target.dimension()),
      stageAccepts_(static_cast<std::size_t>(std::max(config_.drStageCount, 0)) + 1, 0) {
  config_.validate(target.dimension());
  if (proposal_.dimension() != target.dimension())
    throw Error(ErrorCode::DimensionMismatch, "proposal and target dimensions differ");
  if (proposal_.dr_stage_count() != config_.drStageCount)
    throw Error(ErrorCode::InvalidSpec, "proposal carries " + std::to_string(proposal_.dr_stage_count()) +
                                            " delayed-rejection scales but the kernel expects " +
                                            std::to_string(config_.drStageCount));
  if (!rounds_) throw Error(ErrorCode::InvalidSpec, "sampler needs a round strategy");
}

void Sampler::start(ChainSink& sink) {
  const double logStart = (*target_)(config_.startPoint);
  if (logStart == kMinusInfinity) throw Error(ErrorCode::NonFiniteStart, "start point has zero density");
  incumbent_ = ChainRow{};
  incumbent_.state = config_.startPoint;
  incumbent_.logFunc = logStart;
  incumbentStart_ = 0;
  verboseLength_ = 1;
  compactLength_ = 1;
  uniqueMoments_.add(incumbent_.state);
  burnin_.add_row(0, logStart);
  started_ = true;
  maybe_adapt();
  adaptedThisRound_ = false;
  if (verboseLength_ % kProgressCadence == 0)
    sink.on_progress({verboseLength_, compactLength_, 1.0, pendingMeasure_});
  sink.on_checkpoint(*this);
}

void Sampler::emit_incumbent(ChainSink& sink) {
  moments_.add(incumbent_.state, incumbent_.weight);
  ++rowsEmitted_;
  sink.on_row(incumbent_);
}

void Sampler::maybe_adapt() {
  if (compactLength_ % config_.adaptationPeriod != 0) return;
  const bool greedy = adaptationAttempts_ < config_.greedyAdaptationCount;
  ++adaptationAttempts_;
  ChainMoments m;
  if (greedy) {
    m.mean = uniqueMoments_.mean();
    m.covariance = uniqueMoments_.covariance();
  } else {
    RunningMoments all = moments_;
    all.add(incumbent_.state, incumbent_.weight);
    m.mean = all.mean();
    m.covariance = all.covariance();
  }
  m.count = compactLength_;
  auto [next, record] = adapt(proposal_, m, compactLength_);
  if (next.adaptation_count() != proposal_.adaptation_count()) {
    adaptations_.push_back(record);
    const double s = next.scale_factor();
    covarianceHistory_.push_back(s * s * next.covariance());
    adaptedThisRound_ = true;
  }
  proposal_ = std::move(next);
  pendingMeasure_ = record.measure;
}

void Sampler::iterate(ChainSink& sink) {
  ++round_;
  RoundResult result = rounds_->run_round(*target_, proposal_, incumbent_.state, incumbent_.logFunc, round_);
  stage0Attempts_ += result.stage0Attempts;
  stage0Accepts_ += result.stage0Accepts;
  ++verboseLength_;
  if (result.accepted) {
    const StepOutcome& step = *result.accepted;
    ++stageAccepts_[static_cast<std::size_t>(step.acceptedAtStage)];
    incumbent_.meanAcceptanceRate =
        static_cast<double>(compactLength_) / static_cast<double>(verboseLength_ - 1);
    incumbent_.burninLocation = burnin_.location();
    emit_incumbent(sink);

    incumbent_ = ChainRow{};
    incumbent_.processId = result.rank;
    incumbent_.drStage = static_cast<std::uint32_t>(step.acceptedAtStage);
    incumbent_.adaptationMeasure = pendingMeasure_;
    incumbent_.state = step.acceptedState;
    incumbent_.logFunc = step.acceptedLogFunc;
    pendingMeasure_ = 0.0;
    incumbentStart_ = verboseLength_ - 1;
    ++compactLength_;
    uniqueMoments_.add(incumbent_.state);
    burnin_.add_row(incumbentStart_, incumbent_.logFunc);
    maybe_adapt();
  } else {
    ++incumbent_.weight;
  }

  if (verboseLength_ % kProgressCadence == 0) {
    const double lastMeasure = adaptations_.empty() ? 0.0 : adaptations_.back().measure;
    sink.on_progress({verboseLength_, compactLength_,
                      static_cast<double>(compactLength_) / static_cast<double>(verboseLength_), lastMeasure});
  }
  if (adaptedThisRound_ || rowsEmitted_ - rowsAtCheckpoint_ >= kRowsPerCheckpoint) {
    adaptedThisRound_ = false;
    rowsAtCheckpoint_ = rowsEmitted_;
    sink.on_checkpoint(*this);
  }
}

void Sampler::run(ChainSink& sink) {
  if (finished_) return;
  if (!started_) start(sink);
  while (compactLength_ < config_.chainLengthTarget) iterate(sink);
  incumbent_.meanAcceptanceRate = static_cast<double>(compactLength_) / static_cast<double>(verboseLength_);
  incumbent_.burninLocation = burnin_.location();
  emit_incumbent(sink);
  finished_ = true;
}

KernelSummary Sampler::summary() const {
  KernelSummary s;
  s.verboseLength = verboseLength_;
  s.compactLength = compactLength_;
  s.rounds = round_;
  s.stageAccepts = stageAccepts_;
  for (auto count : stageAccepts_)
    s.stageAcceptanceRate.push_back(round_ == 0 ? 0.0 : static_cast<double>(count) / static_cast<double>(round_));
  s.meanAcceptanceRate =
      verboseLength_ == 0 ? 0.0 : static_cast<double>(compactLength_) / static_cast<double>(verboseLength_);
  s.stage0Attempts = stage0Attempts_;
  s.stage0Accepts = stage0Accepts_;
  s.proposalAcceptanceRate =
      stage0Attempts_ == 0 ? 0.0 : static_cast<double>(stage0Accepts_) / static_cast<double>(stage0Attempts_);
  s.burninLocation = burnin_.location();
  s.finalProposal = proposal_;
  s.adaptations = adaptations_;
  s.covarianceHistory = covarianceHistory_;
  return s;
}

void Sampler::save(ByteWriter& out) const {
  out.put<std::uint8_t>(started_ ? 1 : 0);
  out.put<std::uint8_t>(finished_ ? 1 : 0);
  proposal_.save(out);
  out.put<std::uint32_t>(incumbent_.processId);
  out.put<std::uint32_t>(incumbent_.drStage);
  out.put<double>(incumbent_.meanAcceptanceRate);
  out.put<double>(incumbent_.adaptationMeasure);
  out.put<std::uint64_t>(incumbent_.burninLocation);
  out.put<std::uint64_t>(incumbent_.weight);
  out.put<double>(incumbent_.logFunc);
  out.put_vector(incumbent_.state);
  out.put<std::uint64_t>(incumbentStart_);
  out.put<double>(pendingMeasure_);
  moments_.save(out);
  uniqueMoments_.save(out);
  out.put<std::uint64_t>(verboseLength_);
  out.put<std::uint64_t>(compactLength_);
  out.put<std::uint64_t>(round_);
  out.put<std::uint64_t>(rowsEmitted_);
  out.put<std::uint64_t>(rowsAtCheckpoint_);
  out.put<std::uint64_t>(adaptationAttempts_);
  out.put_list(stageAccepts_);
  out.put<std::uint64_t>(stage0Attempts_);
  out.put<std::uint64_t>(stage0Accepts_);
  out.put<std::uint64_t>(adaptations_.size());
  for (const auto& a : adaptations_) {
    out.put<double>(a.measure);
    out.put<std::uint64_t>(a.atChainLength);
  }
  out.put<std::uint64_t>(covarianceHistory_.size());
  for (const auto& c : covarianceHistory_) out.put_matrix(c);
  rounds_->save(out);
}

Sampler Sampler::resume(const TargetDensity& target, KernelConfig config, std::unique_ptr<RoundStrategy> rounds,
                        ByteReader& in, std::span<const ChainRow> writtenRows) {
  const bool started = in.get<std::uint8_t>() != 0;
  const bool finished = in.get<std::uint8_t>() != 0;
  ProposalState proposal = ProposalState::load(in);
  Sampler s(target, std::move(config), std::move(proposal), std::move(rounds));
  s.started_ = started;
  s.finished_ = finished;
  s.incumbent_.processId = in.get<std::uint32_t>();
  s.incumbent_.drStage = in.get<std::uint32_t>();
  s.incumbent_.meanAcceptanceRate = in.get<double>();
  s.incumbent_.adaptationMeasure = in.get<double>();
  s.incumbent_.burninLocation = in.get<std::uint64_t>();
  s.incumbent_.weight = in.get<std::uint64_t>();
  s.incumbent_.logFunc = in.get<double>();
  s.incumbent_.state = in.get_vector();
  s.incumbentStart_ = in.get<std::uint64_t>();
  s.pendingMeasure_ = in.get<double>();
  s.moments_ = RunningMoments::load(in);
  s.uniqueMoments_ = RunningMoments::load(in);
  s.verboseLength_ = in.get<std::uint64_t>();
  s.compactLength_ = in.get<std::uint64_t>();
  s.round_ = in.get<std::uint64_t>();
  s.rowsEmitted_ = in.get<std::uint64_t>();
  s.rowsAtCheckpoint_ = in.get<std::uint64_t>();
  s.adaptationAttempts_ = in.get<std::uint64_t>();
  s.stageAccepts_ = in.get_list<std::uint64_t>();
  s.stage0Attempts_ = in.get<std::uint64_t>();
  s.stage0Accepts_ = in.get<std::uint64_t>();
  const auto nAdapt = in.get<std::uint64_t>();
  for (std::uint64_t i = 0; i < nAdapt; ++i) {
    AdaptationRecord a;
    a.measure = in.get<double>();
    a.atChainLength = in.get<std::uint64_t>();
    s.adaptations_.push_back(a);
  }
  const auto nCov = in.get<std::uint64_t>();
  for (std::uint64_t i = 0; i < nCov; ++i) s.covarianceHistory_.push_back(in.get_matrix());
  s.rounds_->load(in);

  if (s.incumbent_.state.size() != target.dimension() || s.stageAccepts_.size() != static_cast<std::size_t>(s.config_.drStageCount) + 1)
    throw Error(ErrorCode::CorruptRestart, "snapshot does not match the target dimension");
  if (writtenRows.size() != s.rowsEmitted_)
    throw Error(ErrorCode::CorruptRestart, "snapshot expects " + std::to_string(s.rowsEmitted_) +
                                               " chain rows, found " + std::to_string(writtenRows.size()));
  std::uint64_t start = 0;
  for (const auto& row : writtenRows) {
    s.burnin_.add_row(start, row.logFunc);
    start += row.weight;
  }
  if (s.started_) s.burnin_.add_row(s.incumbentStart_, s.incumbent_.logFunc);
  return s;
}

KernelSummary run_kernel(const TargetDensity& target, const KernelConfig& config, const ProposalState& proposal,
                         RandomStream stream, ChainSink& sink) {
  Sampler sampler(target, config, proposal, std::make_unique<ContinuousStreamRounds>(std::move(stream)));
  sampler.run(sink);
  return sampler.summary();
}

}  // namespace paradram
