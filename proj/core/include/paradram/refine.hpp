#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "paradram/chain.hpp"

namespace paradram {

enum class IacMethod { BatchMeans };

struct IacEstimate {
  std::vector<double> perDimension;
  double aggregate = 1.0;  // max over dimensions
  IacMethod method = IacMethod::BatchMeans;
};

/// Integrated autocorrelation of a (optionally weighted) series, >= 1.
///
/// Batch means. The batch size m is the smallest power of two with
/// m >= 4 * IAC(m), where IAC(m) = m Var(batch means) / Var(series); the
/// estimate is extrapolated as 2 IAC(m) - IAC(m/2) to cancel the O(1/m)
/// truncation bias. Batches never number fewer than floor(n^(1/3)).
/// A constant series returns 1. Throws SeriesTooShort below 8 points.
double estimate_iac(std::span<const double> series, std::span<const std::uint64_t> weights = {});

/// Per-column IAC of an n x d sample.
IacEstimate estimate_iac(const Eigen::MatrixXd& samples, std::span<const std::uint64_t> weights = {});

struct RefinementRound {
  int phase = 1;  // 1: compact sequence, 2: verbose sequence
  double iacAggregate = 1.0;
  std::uint64_t keptCount = 0;  // verbose points surviving the round
};

struct RefinedSample {
  int dimension = 1;
  std::vector<Point> points;
  std::vector<double> logFuncs;
  std::uint64_t sourceVerboseLength = 0;
  std::vector<RefinementRound> rounds;
};

inline constexpr double kRefinementTolerance = 0.05;
// About the 95th percentile of (estimate - 1) sqrt(n) for independent input.
inline constexpr double kRefinementNullSpread = 9.0;

/// Drops the burn-in, then thins the unique-state sequence by ceil(IAC) until
/// its IAC is within tolerance of 1, then does the same on the expanded
/// (verbose) sequence. Only rounds that removed points are recorded.
///
/// For short series the tolerance widens to the estimator's own spread under
/// independence, nullSpread/sqrt(n); otherwise noise alone keeps halving the sample.
RefinedSample refine_two_phase(const CompactChain& chain, double tolerance = kRefinementTolerance,
                               double nullSpread = kRefinementNullSpread);

/// Treats a refined sample as a chain of unit-weight rows.
CompactChain as_chain(const RefinedSample& sample);

struct KsResult {
  double statistic = 0.0;
  double pValue = 1.0;
};

/// Two-sample Kolmogorov-Smirnov test with the asymptotic p-value at
/// effective size na nb / (na + nb).
KsResult ks_two_sample(std::span<const double> a, std::span<const double> b);

/// P(K > lambda) for the Kolmogorov distribution.
double kolmogorov_survival(double lambda);

struct PairwiseKs {
  std::size_t first = 0;
  std::size_t second = 0;
  int dimension = 0;
  KsResult result;
  bool passed = true;
};

struct ConvergenceReport {
  double significance = 0.01;
  double threshold = 0.01;  // Bonferroni-corrected per-test level
  std::vector<PairwiseKs> tests;
  bool passed = true;
};

/// Pairwise, per-dimension KS comparison of refined samples at level alpha,
/// Bonferroni-corrected over pairs x dimensions.
ConvergenceReport check_convergence(std::span<const RefinedSample> samples, double significance = 0.01);

}  // namespace paradram
