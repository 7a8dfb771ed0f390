#pragma once

#include <functional>
#include <limits>
#include <map>
#include <span>
#include <string>

#include <Eigen/Dense>

namespace paradram {

using Point = Eigen::VectorXd;

inline constexpr double kMinusInfinity = -std::numeric_limits<double>::infinity();

/// A log-density over R^d, known up to an additive constant.
///
/// The evaluator must be pure: identical points give identical values and it
/// may be called concurrently from several workers. Zero-density points
/// return kMinusInfinity; NaN is never a valid result.
class TargetDensity {
 public:
  using Evaluator = std::function<double(std::span<const double>)>;

  TargetDensity(std::string name, int dimension, Evaluator evaluator);

  const std::string& name() const noexcept { return name_; }
  int dimension() const noexcept { return dimension_; }

  double operator()(std::span<const double> point) const;
  double operator()(const Point& point) const { return (*this)(std::span<const double>(point.data(), point.size())); }

 private:
  std::string name_;
  int dimension_;
  Evaluator evaluator_;
};

/// Checked evaluation; throws DimensionMismatch or NonFiniteDensity.
double log_density(const TargetDensity& target, std::span<const double> point);
inline double log_density(const TargetDensity& target, const Point& point) { return target(point); }

enum class TargetKind { MultivariateNormal, HimmelblauDensity, Banana };

std::string_view to_string(TargetKind kind) noexcept;
TargetKind parse_target_kind(std::string_view text);

struct BuiltinTargetSpec {
  TargetKind kind = TargetKind::MultivariateNormal;
  int dimension = 2;
  Eigen::VectorXd mean;        // MVN only; empty means zero
  Eigen::MatrixXd covariance;  // MVN only; empty means identity
  /// Himmelblau: "scale" (temperature s, default 10).
  /// Banana: "curvature" (default 0.1) and "width" (sd of the first axis, default 10).
  std::map<std::string, double> shapeParams;
};

/// Builds one of the built-in densities:
///   MVN        log N(x; mean, covariance), fully normalized
///   Himmelblau -((x^2 + y - 11)^2 + (x + y^2 - 7)^2) / s
///   Banana     Gaussian N(0, diag(w^2, 1, ..., 1)) pushed through the
///              volume-preserving twist y2 -> y2 + b*y1^2 - b*w^2
TargetDensity make_builtin_target(const BuiltinTargetSpec& spec);

double himmelblau(double x, double y) noexcept;

}  // namespace paradram
