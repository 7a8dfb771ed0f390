#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "oracles.hpp"
#include "paradram/error.hpp"
#include "paradram/model.hpp"

using namespace paradram;

namespace {

BuiltinTargetSpec mvn(int d, Eigen::VectorXd mean = {}, Eigen::MatrixXd cov = {}) {
  BuiltinTargetSpec s;
  s.kind = TargetKind::MultivariateNormal;
  s.dimension = d;
  s.mean = std::move(mean);
  s.covariance = std::move(cov);
  return s;
}

BuiltinTargetSpec himmel(double scale) {
  BuiltinTargetSpec s;
  s.kind = TargetKind::HimmelblauDensity;
  s.dimension = 2;
  s.shapeParams["scale"] = scale;
  return s;
}

}  // namespace

TEST_CASE("standard normal peak and one sigma") {
  const auto t = make_builtin_target(mvn(1));
  const double halfLog2Pi = 0.5 * std::log(2.0 * std::numbers::pi);
  CHECK(t(Point::Constant(1, 0.0)) == doctest::Approx(-halfLog2Pi).epsilon(1e-14));
  CHECK(t(Point::Constant(1, 1.0)) == doctest::Approx(-halfLog2Pi - 0.5).epsilon(1e-14));
  CHECK(t(Point::Constant(1, 0.0)) == doctest::Approx(-0.91893853).epsilon(1e-8));
}

TEST_CASE("mvn closed-form peaks") {
  CHECK(make_builtin_target(mvn(4))(Point::Zero(4)) == doctest::Approx(-3.67575413).epsilon(1e-8));
  Eigen::MatrixXd cov = Eigen::Vector2d(1.0, 4.0).asDiagonal();
  CHECK(make_builtin_target(mvn(2, {}, cov))(Point::Zero(2)) == doctest::Approx(-2.53102424).epsilon(1e-8));
}

TEST_CASE("mvn agrees with explicit-inverse oracle on random inputs") {
  std::mt19937_64 rng(7);
  std::normal_distribution<double> z;
  for (int d = 1; d <= 5; ++d) {
    const Eigen::MatrixXd cov = oracle::random_spd(d, rng);
    Eigen::VectorXd mean(d);
    for (auto& m : mean) m = z(rng);
    const auto t = make_builtin_target(mvn(d, mean, cov));
    for (int k = 0; k < 20; ++k) {
      Eigen::VectorXd x(d);
      for (auto& v : x) v = 2.0 * z(rng);
      CHECK(t(x) == doctest::Approx(oracle::mvn_log_density(x, mean, cov)).epsilon(1e-10));
    }
  }
}

TEST_CASE("himmelblau density") {
  CHECK(make_builtin_target(himmel(1.0))(Point(Eigen::Vector2d(3.0, 2.0))) == 0.0);
  CHECK(make_builtin_target(himmel(10.0))(Point(Eigen::Vector2d(0.0, 0.0))) == doctest::Approx(-17.0));
  const auto t = make_builtin_target(himmel(10.0));
  for (double x = -4.0; x <= 4.0; x += 0.7)
    for (double y = -4.0; y <= 4.0; y += 0.9)
      CHECK(t(Point(Eigen::Vector2d(x, y))) == doctest::Approx(-oracle::himmelblau(x, y) / 10.0).epsilon(1e-14));
}

TEST_CASE("banana is finite and deterministic") {
  BuiltinTargetSpec s;
  s.kind = TargetKind::Banana;
  s.dimension = 3;
  const auto t = make_builtin_target(s);
  const Point x = Eigen::Vector3d(0.3, -1.2, 2.0);
  CHECK(std::isfinite(t(x)));
  CHECK(t(x) == t(x));
}

TEST_CASE("errors") {
  const auto t = make_builtin_target(mvn(2));
  CHECK_THROWS_AS(t(Point::Zero(3)), Error);
  try {
    (void)t(Point::Zero(3));
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::DimensionMismatch);
  }
  Eigen::MatrixXd bad(2, 2);
  bad << 1.0, 2.0, 2.0, 1.0;
  try {
    (void)make_builtin_target(mvn(2, {}, bad));
    FAIL("expected NotPositiveDefinite");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::NotPositiveDefinite);
  }
  auto h = himmel(10.0);
  h.dimension = 3;
  try {
    (void)make_builtin_target(h);
    FAIL("expected BadDimension");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::BadDimension);
  }
}

TEST_CASE("mvn density integrates to one over an 8 sigma box") {
  Eigen::MatrixXd cov(2, 2);
  cov << 1.0, 0.6, 0.6, 2.0;
  const auto t = make_builtin_target(mvn(2, Eigen::Vector2d(0.5, -1.0), cov));
  const double half = 8.0 * std::sqrt(2.0);
  const int n = 400;
  const double h = 2.0 * half / n;
  double sum = 0.0;
  double best = -1e300;
  Eigen::Vector2d argmax;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      const Eigen::Vector2d x(0.5 - half + (i + 0.5) * h, -1.0 - half + (j + 0.5) * h);
      const double lp = t(Point(x));
      sum += std::exp(lp);
      if (lp > best) best = lp, argmax = x;
    }
  CHECK(sum * h * h == doctest::Approx(1.0).epsilon(0.01));
  CHECK((argmax - Eigen::Vector2d(0.5, -1.0)).cwiseAbs().maxCoeff() <= h);
}
