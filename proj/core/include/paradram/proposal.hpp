#pragma once

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "paradram/model.hpp"
#include "paradram/random.hpp"

namespace paradram {

class ByteWriter;
class ByteReader;

/// Multivariate Gaussian random-walk proposal.
///
/// Stage 0 draws from N(center, s^2 C); delayed-rejection stage k >= 1 uses
/// the same shape with scale s * drScales[k-1]. The Cholesky factor is kept
/// consistent with the covariance by construction, so the only way to change
/// the covariance is through with_covariance().
class ProposalState {
 public:
  /// Identity covariance, s = 2.38/sqrt(d), drScales = 0.5^k for k = 1..drStageCount.
  static ProposalState initial(int dimension, int drStageCount);
  static ProposalState initial(const Eigen::MatrixXd& covariance, double scaleFactor,
                               std::vector<double> drScales);

  int dimension() const noexcept { return static_cast<int>(covariance_.rows()); }
  const Eigen::MatrixXd& covariance() const noexcept { return covariance_; }
  const Eigen::MatrixXd& chol_factor() const noexcept { return cholFactor_; }
  double scale_factor() const noexcept { return scaleFactor_; }
  const std::vector<double>& dr_scales() const noexcept { return drScales_; }
  int dr_stage_count() const noexcept { return static_cast<int>(drScales_.size()); }
  std::uint64_t adaptation_count() const noexcept { return adaptationCount_; }

  /// scaleFactor for stage 0, scaleFactor * drScales[stage-1] otherwise.
  double effective_scale(int stage) const;

  /// log det(covariance), from the Cholesky diagonal.
  double log_det() const noexcept;

  /// Copy with a new covariance; throws NotPositiveDefinite if it cannot be factorized.
  ProposalState with_covariance(const Eigen::MatrixXd& covariance) const;
  ProposalState with_adaptation_count(std::uint64_t count) const;

  void save(ByteWriter& out) const;
  static ProposalState load(ByteReader& in);

  friend bool operator==(const ProposalState& a, const ProposalState& b);

 private:
  ProposalState() = default;

  Eigen::MatrixXd covariance_;
  Eigen::MatrixXd cholFactor_;
  double scaleFactor_ = 1.0;
  std::vector<double> drScales_;
  std::uint64_t adaptationCount_ = 0;
};

struct AdaptationRecord {
  double measure = 0.0;
  std::uint64_t atChainLength = 0;
};

/// Weighted first and second moments of the chain history.
struct ChainMoments {
  Eigen::VectorXd mean;
  Eigen::MatrixXd covariance;  // population-normalized
  std::uint64_t count = 0;     // unique states contributing
};

/// center + effScale(stage) * L * z for a caller-provided normal vector z.
Point propose_from_normals(const ProposalState& state, const Point& center, int stage,
                           std::span<const double> z);

/// Draws exactly d standard normals from the stream and proposes.
Point sample_candidate(const ProposalState& state, const Point& center, int stage, RandomStream& stream);

/// Refreshes the proposal shape from the chain moments:
/// covariance = s^2 (C + eps I), eps = 1e-10 trace(C)/d.
/// With fewer than d+1 contributing states the state is returned unchanged and
/// the measure is 0.
std::pair<ProposalState, AdaptationRecord> adapt(const ProposalState& state, const ChainMoments& moments,
                                                 std::uint64_t chainLength);

/// Upper bound on the total variation distance between the two equal-mean
/// proposal Gaussians N(0, s1^2 C1) and N(0, s2^2 C2): sqrt(1 - BC^2), where
/// BC is their Bhattacharyya coefficient. 0 iff the proposals coincide, tends
/// to 1 as they separate.
double adaptation_measure(const ProposalState& previous, const ProposalState& next);

/// Same bound computed directly from two effective covariance matrices.
double adaptation_measure(const Eigen::MatrixXd& first, const Eigen::MatrixXd& second);

}  // namespace paradram
