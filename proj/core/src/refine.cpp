#include "paradram/refine.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include "paradram/error.hpp"

namespace paradram {

namespace {

constexpr std::size_t kMinSeries = 8;
constexpr double kBatchSizeFactor = 4.0;

// An estimate this close to 1 is indistinguishable from no correlation.
double stop_threshold(double tolerance, double nullSpread, std::size_t n) {
  return 1.0 + std::max(tolerance, nullSpread / std::sqrt(static_cast<double>(n)));
}

std::size_t floor_cbrt(std::size_t n) {
  auto b = static_cast<std::size_t>(std::cbrt(static_cast<double>(n)));
  while ((b + 1) * (b + 1) * (b + 1) <= n) ++b;
  while (b > 0 && b * b * b > n) --b;
  return b;
}

// m Var(batch means) / Var(series), population normalization throughout.
double batch_ratio(std::span<const double> x, double variance, std::size_t m) {
  const std::size_t b = x.size() / m;
  std::vector<double> means(b);
  for (std::size_t i = 0; i < b; ++i) {
    double sum = 0.0;
    for (std::size_t k = 0; k < m; ++k) sum += x[i * m + k];
    means[i] = sum / static_cast<double>(m);
  }
  const double grand = std::accumulate(means.begin(), means.end(), 0.0) / static_cast<double>(b);
  double ss = 0.0;
  for (double v : means) ss += (v - grand) * (v - grand);
  return static_cast<double>(m) * (ss / static_cast<double>(b)) / variance;
}

double iac_of_expanded(std::span<const double> x) {
  const std::size_t n = x.size();
  if (n < kMinSeries)
    throw Error(ErrorCode::SeriesTooShort,
                "IAC needs at least 8 points, got " + std::to_string(n));
  const auto [lo, hi] = std::minmax_element(x.begin(), x.end());
  if (*lo == *hi) return 1.0;
  const double mean = std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(n);
  double ss = 0.0;
  for (double v : x) ss += (v - mean) * (v - mean);
  const double variance = ss / static_cast<double>(n);
  if (!(variance > 0.0)) return 1.0;

  const std::size_t minBatches = std::max<std::size_t>(2, floor_cbrt(n));
  const std::size_t maxBatchSize = n / minBatches;
  for (std::size_t m = 4; m <= maxBatchSize; m *= 2) {
    const double estimate = 2.0 * batch_ratio(x, variance, m) - batch_ratio(x, variance, m / 2);
    if (static_cast<double>(m) >= kBatchSizeFactor * estimate) return std::max(1.0, estimate);
  }
  const double estimate =
      2.0 * batch_ratio(x, variance, maxBatchSize) - batch_ratio(x, variance, std::max<std::size_t>(1, maxBatchSize / 2));
  return std::max(1.0, estimate);
}

std::vector<double> expand(std::span<const double> series, std::span<const std::uint64_t> weights) {
  if (weights.size() != series.size())
    throw Error(ErrorCode::DimensionMismatch, "one weight per series element required");
  std::vector<double> out;
  out.reserve(std::accumulate(weights.begin(), weights.end(), std::uint64_t{0}));
  for (std::size_t i = 0; i < series.size(); ++i) out.insert(out.end(), weights[i], series[i]);
  return out;
}

double aggregate_of(const std::vector<Point>& points, int dimension) {
  std::vector<double> column(points.size());
  double worst = 1.0;
  for (int j = 0; j < dimension; ++j) {
    for (std::size_t i = 0; i < points.size(); ++i) column[i] = points[i][j];
    worst = std::max(worst, iac_of_expanded(column));
  }
  return worst;
}

template <typename T>
std::vector<T> every_kth(const std::vector<T>& values, std::size_t k) {
  std::vector<T> out;
  out.reserve(values.size() / k + 1);
  for (std::size_t i = 0; i < values.size(); i += k) out.push_back(values[i]);
  return out;
}

}  // namespace

double estimate_iac(std::span<const double> series, std::span<const std::uint64_t> weights) {
  if (weights.empty()) return iac_of_expanded(series);
  const auto expanded = expand(series, weights);
  return iac_of_expanded(expanded);
}

IacEstimate estimate_iac(const Eigen::MatrixXd& samples, std::span<const std::uint64_t> weights) {
  IacEstimate out;
  std::vector<double> column(static_cast<std::size_t>(samples.rows()));
  for (Eigen::Index j = 0; j < samples.cols(); ++j) {
    for (Eigen::Index i = 0; i < samples.rows(); ++i) column[static_cast<std::size_t>(i)] = samples(i, j);
    out.perDimension.push_back(estimate_iac(column, weights));
  }
  out.aggregate = out.perDimension.empty() ? 1.0 : *std::max_element(out.perDimension.begin(), out.perDimension.end());
  return out;
}

RefinedSample refine_two_phase(const CompactChain& chain, double tolerance, double nullSpread) {
  RefinedSample out;
  out.dimension = chain.dimension();
  out.sourceVerboseLength = chain.verbose_length();
  if (chain.empty()) throw Error(ErrorCode::SeriesTooShort, "cannot refine an empty chain");

  const std::uint64_t burnin = chain.rows().back().burninLocation;
  std::vector<ChainRow> rows;
  std::uint64_t start = 0;
  std::uint64_t kept = 0;
  for (const auto& row : chain.rows()) {
    if (start >= burnin) {
      rows.push_back(row);
      kept += row.weight;
    }
    start += row.weight;
  }
  if (kept < kMinSeries)
    throw Error(ErrorCode::SeriesTooShort, "only " + std::to_string(kept) + " verbose states after burn-in");

  if (rows.size() < kMinSeries) {
    for (const auto& row : rows) {
      out.points.push_back(row.state);
      out.logFuncs.push_back(row.logFunc);
    }
    return out;
  }

  // Phase 1: the unique-state sequence, weights carried along.
  while (rows.size() >= kMinSeries) {
    std::vector<Point> states;
    states.reserve(rows.size());
    for (const auto& row : rows) states.push_back(row.state);
    const double aggregate = aggregate_of(states, out.dimension);
    if (aggregate <= stop_threshold(tolerance, nullSpread, states.size())) break;
    rows = every_kth(rows, static_cast<std::size_t>(std::ceil(aggregate)));
    std::uint64_t verbose = 0;
    for (const auto& row : rows) verbose += row.weight;
    out.rounds.push_back({1, aggregate, verbose});
  }

  // Phase 2: the expanded (Markov) sequence.
  std::vector<Point> points;
  std::vector<double> logs;
  for (const auto& row : rows) {
    for (std::uint64_t k = 0; k < row.weight; ++k) {
      points.push_back(row.state);
      logs.push_back(row.logFunc);
    }
  }
  while (points.size() >= kMinSeries) {
    const double aggregate = aggregate_of(points, out.dimension);
    if (aggregate <= stop_threshold(tolerance, nullSpread, points.size())) break;
    const auto k = static_cast<std::size_t>(std::ceil(aggregate));
    points = every_kth(points, k);
    logs = every_kth(logs, k);
    out.rounds.push_back({2, aggregate, points.size()});
  }
  out.points = std::move(points);
  out.logFuncs = std::move(logs);
  return out;
}

CompactChain as_chain(const RefinedSample& sample) {
  CompactChain chain(sample.dimension);
  for (std::size_t i = 0; i < sample.points.size(); ++i) {
    ChainRow row;
    row.state = sample.points[i];
    row.logFunc = sample.logFuncs[i];
    chain.append_or_increment(row);
  }
  return chain;
}

double kolmogorov_survival(double lambda) {
  if (lambda <= 0.0) return 1.0;
  if (lambda < 1.18) {
    // Small-lambda form converges fast where the alternating series does not.
    const double pi2 = std::numbers::pi * std::numbers::pi;
    double sum = 0.0;
    for (int k = 1; k <= 50; ++k) {
      const double odd = 2.0 * k - 1.0;
      const double term = std::exp(-odd * odd * pi2 / (8.0 * lambda * lambda));
      sum += term;
      if (term < 1e-17 * sum) break;
    }
    return std::clamp(1.0 - std::sqrt(2.0 * std::numbers::pi) / lambda * sum, 0.0, 1.0);
  }
  double sum = 0.0;
  double sign = 1.0;
  for (int k = 1; k <= 100; ++k) {
    const double term = std::exp(-2.0 * k * k * lambda * lambda);
    sum += sign * term;
    if (term < 1e-17) break;
    sign = -sign;
  }
  return std::clamp(2.0 * sum, 0.0, 1.0);
}

KsResult ks_two_sample(std::span<const double> a, std::span<const double> b) {
  if (a.empty() || b.empty()) throw Error(ErrorCode::EmptySample, "KS test needs two non-empty samples");
  std::vector<double> x(a.begin(), a.end());
  std::vector<double> y(b.begin(), b.end());
  std::sort(x.begin(), x.end());
  std::sort(y.begin(), y.end());
  const double na = static_cast<double>(x.size());
  const double nb = static_cast<double>(y.size());
  std::size_t i = 0;
  std::size_t j = 0;
  double d = 0.0;
  while (i < x.size() || j < y.size()) {
    const double v = (j == y.size() || (i < x.size() && x[i] <= y[j])) ? x[i] : y[j];
    while (i < x.size() && x[i] == v) ++i;
    while (j < y.size() && y[j] == v) ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
  }
  const double effective = na * nb / (na + nb);
  return {d, kolmogorov_survival(std::sqrt(effective) * d)};
}

ConvergenceReport check_convergence(std::span<const RefinedSample> samples, double significance) {
  ConvergenceReport report;
  report.significance = significance;
  if (samples.size() < 2) return report;
  const int d = samples.front().dimension;
  const std::size_t pairs = samples.size() * (samples.size() - 1) / 2;
  report.threshold = significance / static_cast<double>(pairs * static_cast<std::size_t>(d));
  for (std::size_t p = 0; p < samples.size(); ++p) {
    for (std::size_t q = p + 1; q < samples.size(); ++q) {
      for (int k = 0; k < d; ++k) {
        std::vector<double> a;
        std::vector<double> b;
        for (const auto& pt : samples[p].points) a.push_back(pt[k]);
        for (const auto& pt : samples[q].points) b.push_back(pt[k]);
        PairwiseKs test{p, q, k, ks_two_sample(a, b), true};
        test.passed = test.result.pValue > report.threshold;
        report.passed = report.passed && test.passed;
        report.tests.push_back(test);
      }
    }
  }
  return report;
}

}  // namespace paradram
