#include "paradram/proposal.hpp"

#include <algorithm>
#include <cmath>

#include "paradram/bytes.hpp"
#include "paradram/error.hpp"

namespace paradram {

namespace {

Eigen::MatrixXd factorize(const Eigen::MatrixXd& covariance) {
  Eigen::LLT<Eigen::MatrixXd> llt(covariance);
  if (llt.info() != Eigen::Success)
    throw Error(ErrorCode::NotPositiveDefinite, "proposal covariance failed Cholesky factorization");
  Eigen::MatrixXd lower = llt.matrixL();
  if (!(lower.diagonal().array() > 0.0).all() || !lower.allFinite())
    throw Error(ErrorCode::NotPositiveDefinite, "proposal covariance has a non-positive pivot");
  return lower;
}

double log_det_spd(const Eigen::MatrixXd& m) {
  return 2.0 * factorize(m).diagonal().array().log().sum();
}

}  // namespace

ProposalState ProposalState::initial(int dimension, int drStageCount) {
  if (dimension < 1) throw Error(ErrorCode::BadDimension, "proposal dimension must be positive");
  if (drStageCount < 0) throw Error(ErrorCode::InvalidSpec, "negative delayed-rejection stage count");
  std::vector<double> scales;
  for (int k = 1; k <= drStageCount; ++k) scales.push_back(std::pow(0.5, k));
  return initial(Eigen::MatrixXd::Identity(dimension, dimension), 2.38 / std::sqrt(dimension), std::move(scales));
}

ProposalState ProposalState::initial(const Eigen::MatrixXd& covariance, double scaleFactor,
                                     std::vector<double> drScales) {
  if (covariance.rows() < 1 || covariance.rows() != covariance.cols())
    throw Error(ErrorCode::DimensionMismatch, "proposal covariance must be square and non-empty");
  if (!(scaleFactor > 0.0) || !std::isfinite(scaleFactor))
    throw Error(ErrorCode::InvalidSpec, "proposal scale factor must be positive");
  double previous = 1.0;
  for (double s : drScales) {
    if (!(s > 0.0) || !(s < previous))
      throw Error(ErrorCode::InvalidSpec, "delayed-rejection scales must be positive and strictly decreasing");
    previous = s;
  }
  ProposalState state;
  state.covariance_ = 0.5 * (covariance + covariance.transpose());
  state.cholFactor_ = factorize(state.covariance_);
  state.scaleFactor_ = scaleFactor;
  state.drScales_ = std::move(drScales);
  return state;
}

double ProposalState::effective_scale(int stage) const {
  if (stage < 0 || stage > dr_stage_count())
    throw Error(ErrorCode::StageOutOfRange, "stage " + std::to_string(stage) + " exceeds " +
                                                std::to_string(dr_stage_count()) + " delayed-rejection stages");
  return stage == 0 ? scaleFactor_ : scaleFactor_ * drScales_[static_cast<std::size_t>(stage - 1)];
}

double ProposalState::log_det() const noexcept { return 2.0 * cholFactor_.diagonal().array().log().sum(); }

ProposalState ProposalState::with_covariance(const Eigen::MatrixXd& covariance) const {
  if (covariance.rows() != covariance_.rows() || covariance.cols() != covariance_.cols())
    throw Error(ErrorCode::DimensionMismatch, "covariance dimension changed");
  ProposalState next = *this;
  next.covariance_ = 0.5 * (covariance + covariance.transpose());
  next.cholFactor_ = factorize(next.covariance_);
  return next;
}

ProposalState ProposalState::with_adaptation_count(std::uint64_t count) const {
  ProposalState next = *this;
  next.adaptationCount_ = count;
  return next;
}

void ProposalState::save(ByteWriter& out) const {
  out.put_matrix(covariance_);
  out.put_matrix(cholFactor_);
  out.put<double>(scaleFactor_);
  out.put_list(drScales_);
  out.put<std::uint64_t>(adaptationCount_);
}

ProposalState ProposalState::load(ByteReader& in) {
  ProposalState state;
  state.covariance_ = in.get_matrix();
  state.cholFactor_ = in.get_matrix();
  state.scaleFactor_ = in.get<double>();
  state.drScales_ = in.get_list<double>();
  state.adaptationCount_ = in.get<std::uint64_t>();
  if (state.covariance_.rows() != state.cholFactor_.rows() || state.covariance_.rows() < 1)
    throw Error(ErrorCode::CorruptRestart, "inconsistent proposal state");
  return state;
}

bool operator==(const ProposalState& a, const ProposalState& b) {
  return a.covariance_.rows() == b.covariance_.rows() && a.covariance_ == b.covariance_ &&
         a.cholFactor_ == b.cholFactor_ && a.scaleFactor_ == b.scaleFactor_ && a.drScales_ == b.drScales_ &&
         a.adaptationCount_ == b.adaptationCount_;
}

Point propose_from_normals(const ProposalState& state, const Point& center, int stage,
                           std::span<const double> z) {
  const int d = state.dimension();
  if (center.size() != d || static_cast<int>(z.size()) != d)
    throw Error(ErrorCode::DimensionMismatch, "proposal center or normal vector has wrong length");
  const double scale = state.effective_scale(stage);
  Eigen::Map<const Eigen::VectorXd> normals(z.data(), d);
  const Eigen::VectorXd step = state.chol_factor().triangularView<Eigen::Lower>() * normals;
  return center + scale * step;
}

Point sample_candidate(const ProposalState& state, const Point& center, int stage, RandomStream& stream) {
  // Validate before touching the stream so a bad call consumes nothing.
  state.effective_scale(stage);
  Eigen::VectorXd z(state.dimension());
  stream.fill_normal(std::span<double>(z.data(), static_cast<std::size_t>(z.size())));
  return propose_from_normals(state, center, stage, std::span<const double>(z.data(), z.size()));
}

std::pair<ProposalState, AdaptationRecord> adapt(const ProposalState& state, const ChainMoments& moments,
                                                 std::uint64_t chainLength) {
  const int d = state.dimension();
  if (moments.covariance.rows() != d || moments.covariance.cols() != d)
    throw Error(ErrorCode::DimensionMismatch, "chain covariance dimension differs from proposal");
  if (chainLength < static_cast<std::uint64_t>(d) + 1) return {state, AdaptationRecord{0.0, chainLength}};

  const double eps = 1e-10 * moments.covariance.trace() / d;
  Eigen::MatrixXd shape = moments.covariance;
  shape.diagonal().array() += eps;
  ProposalState next = state.with_covariance(shape).with_adaptation_count(state.adaptation_count() + 1);
  // Stored unscaled: the scale factor is applied at draw time, so the
  // effective proposal covariance is s^2 (C + eps I).
  return {next, AdaptationRecord{adaptation_measure(state, next), chainLength}};
}

double adaptation_measure(const Eigen::MatrixXd& first, const Eigen::MatrixXd& second) {
  if (first.rows() != second.rows() || first.cols() != second.cols())
    throw Error(ErrorCode::DimensionMismatch, "adaptation measure needs equal dimensions");
  if (first == second) return 0.0;
  const Eigen::MatrixXd average = 0.5 * (first + second);
  // ln BC = (ln|A| + ln|B|)/4 - ln|(A+B)/2|/2 ; BC <= 1 by log-concavity of det.
  const double logBc = 0.25 * (log_det_spd(first) + log_det_spd(second)) - 0.5 * log_det_spd(average);
  return std::sqrt(std::clamp(-std::expm1(2.0 * std::min(0.0, logBc)), 0.0, 1.0));
}

double adaptation_measure(const ProposalState& previous, const ProposalState& next) {
  if (previous.dimension() != next.dimension())
    throw Error(ErrorCode::DimensionMismatch, "adaptation measure needs equal dimensions");
  const double s1 = previous.scale_factor();
  const double s2 = next.scale_factor();
  if (s1 == s2 && previous.covariance() == next.covariance()) return 0.0;
  return adaptation_measure(Eigen::MatrixXd(s1 * s1 * previous.covariance()),
                            Eigen::MatrixXd(s2 * s2 * next.covariance()));
}

}  // namespace paradram
