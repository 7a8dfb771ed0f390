#include "paradram/model.hpp"

#include <cmath>
#include <numbers>
#include <utility>

#include "paradram/error.hpp"

namespace paradram {

namespace {

constexpr double kLog2Pi = 1.8378770664093454835606594728112;

double param_or(const BuiltinTargetSpec& spec, const std::string& key, double fallback) {
  const auto it = spec.shapeParams.find(key);
  return it == spec.shapeParams.end() ? fallback : it->second;
}

TargetDensity make_mvn(const BuiltinTargetSpec& spec) {
  const int d = spec.dimension;
  Eigen::VectorXd mean = spec.mean.size() == 0 ? Eigen::VectorXd::Zero(d) : spec.mean;
  Eigen::MatrixXd cov = spec.covariance.size() == 0 ? Eigen::MatrixXd::Identity(d, d) : spec.covariance;
  if (mean.size() != d) throw Error(ErrorCode::DimensionMismatch, "MVN mean length differs from dimension");
  if (cov.rows() != d || cov.cols() != d)
    throw Error(ErrorCode::DimensionMismatch, "MVN covariance is not d x d");
  if (!cov.isApprox(cov.transpose(), 1e-12))
    throw Error(ErrorCode::NotPositiveDefinite, "MVN covariance is not symmetric");

  Eigen::LLT<Eigen::MatrixXd> llt(cov);
  if (llt.info() != Eigen::Success || (llt.matrixL().toDenseMatrix().diagonal().array() <= 0.0).any())
    throw Error(ErrorCode::NotPositiveDefinite, "MVN covariance failed Cholesky factorization");
  Eigen::MatrixXd lower = llt.matrixL();
  const double logNorm = -lower.diagonal().array().log().sum() - 0.5 * d * kLog2Pi;

  return TargetDensity("MultivariateNormal", d,
                       [mean = std::move(mean), lower = std::move(lower), logNorm](std::span<const double> x) {
                         Eigen::Map<const Eigen::VectorXd> point(x.data(), static_cast<Eigen::Index>(x.size()));
                         const Eigen::VectorXd white =
                             lower.triangularView<Eigen::Lower>().solve(point - mean);
                         return logNorm - 0.5 * white.squaredNorm();
                       });
}

TargetDensity make_himmelblau(const BuiltinTargetSpec& spec) {
  if (spec.dimension != 2) throw Error(ErrorCode::BadDimension, "Himmelblau density is two-dimensional");
  const double s = param_or(spec, "scale", 10.0);
  if (!(s > 0.0) || !std::isfinite(s)) throw Error(ErrorCode::InvalidSpec, "Himmelblau scale must be positive");
  return TargetDensity("HimmelblauDensity", 2,
                       [s](std::span<const double> x) { return -himmelblau(x[0], x[1]) / s; });
}

TargetDensity make_banana(const BuiltinTargetSpec& spec) {
  const int d = spec.dimension;
  if (d < 2) throw Error(ErrorCode::BadDimension, "Banana density needs dimension >= 2");
  const double b = param_or(spec, "curvature", 0.1);
  const double w = param_or(spec, "width", 10.0);
  if (!(w > 0.0)) throw Error(ErrorCode::InvalidSpec, "Banana width must be positive");
  const double logNorm = -0.5 * d * kLog2Pi - std::log(w);
  return TargetDensity("Banana", d, [b, w, logNorm](std::span<const double> x) {
    const double y1 = x[0] / w;
    const double y2 = x[1] + b * x[0] * x[0] - b * w * w;
    double q = y1 * y1 + y2 * y2;
    for (std::size_t i = 2; i < x.size(); ++i) q += x[i] * x[i];
    return logNorm - 0.5 * q;
  });
}

}  // namespace

TargetDensity::TargetDensity(std::string name, int dimension, Evaluator evaluator)
    : name_(std::move(name)), dimension_(dimension), evaluator_(std::move(evaluator)) {
  if (dimension_ < 1) throw Error(ErrorCode::BadDimension, "target dimension must be positive");
  if (!evaluator_) throw Error(ErrorCode::InvalidSpec, "target has no evaluator");
}

double TargetDensity::operator()(std::span<const double> point) const {
  if (static_cast<int>(point.size()) != dimension_)
    throw Error(ErrorCode::DimensionMismatch, "point has " + std::to_string(point.size()) +
                                                  " components, target " + name_ + " expects " +
                                                  std::to_string(dimension_));
  const double value = evaluator_(point);
  if (std::isnan(value) || value == std::numeric_limits<double>::infinity())
    throw Error(ErrorCode::NonFiniteDensity, "target " + name_ + " returned a non-finite log-density");
  return value;
}

double log_density(const TargetDensity& target, std::span<const double> point) { return target(point); }

double himmelblau(double x, double y) noexcept {
  const double a = x * x + y - 11.0;
  const double c = x + y * y - 7.0;
  return a * a + c * c;
}

std::string_view to_string(TargetKind kind) noexcept {
  switch (kind) {
    case TargetKind::MultivariateNormal: return "mvn";
    case TargetKind::HimmelblauDensity: return "himmelblau";
    case TargetKind::Banana: return "banana";
  }
  return "mvn";
}

TargetKind parse_target_kind(std::string_view text) {
  if (text == "mvn") return TargetKind::MultivariateNormal;
  if (text == "himmelblau") return TargetKind::HimmelblauDensity;
  if (text == "banana") return TargetKind::Banana;
  throw Error(ErrorCode::InvalidSpec, "unknown target kind '" + std::string(text) + "' (mvn|himmelblau|banana)");
}

TargetDensity make_builtin_target(const BuiltinTargetSpec& spec) {
  if (spec.dimension < 1) throw Error(ErrorCode::BadDimension, "target dimension must be positive");
  switch (spec.kind) {
    case TargetKind::MultivariateNormal: return make_mvn(spec);
    case TargetKind::HimmelblauDensity: return make_himmelblau(spec);
    case TargetKind::Banana: return make_banana(spec);
  }
  throw Error(ErrorCode::InvalidSpec, "unknown target kind");
}

}  // namespace paradram
