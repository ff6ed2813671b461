#include <doctest.h>

#include <cmath>
#include <limits>
#include <random>

#include "shapsel/error.hpp"
#include "shapsel/regression.hpp"
#include "support/oracles.hpp"
#include "support/regression_fixtures.hpp"

using namespace shapsel;
using shapsel::testing::Dense;

namespace {

Eigen::MatrixXd to_matrix(const testing::RegressionFixture& f) {
  Eigen::MatrixXd x(f.n, f.p);
  for (int i = 0; i < f.n; ++i) {
    for (int j = 0; j < f.p; ++j) x(i, j) = f.x[i * f.p + j];
  }
  return x;
}

Eigen::VectorXd to_vector(const std::vector<double>& v) {
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

Dense to_dense(const Eigen::MatrixXd& x) {
  Dense d(x.rows(), std::vector<double>(x.cols()));
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    for (Eigen::Index j = 0; j < x.cols(); ++j) d[i][j] = x(i, j);
  }
  return d;
}

bool close(double a, double b, double tol) {
  return std::abs(a - b) <= tol * std::max(1.0, std::abs(b));
}

}  // namespace

TEST_CASE("OLS matches statsmodels fixtures within 1e-8") {
  for (const auto& f : testing::kOlsFixtures) {
    CAPTURE(f.name);
    const RegressionResult r = fit_ols(to_matrix(f), to_vector(f.y), 0.0);
    CHECK(close(r.intercept, f.intercept, 1e-8));
    CHECK(r.dof == f.n - f.p - 1);
    for (int j = 0; j < f.p; ++j) {
      CHECK(close(r.coefficients[j], f.coefficients[j], 1e-8));
      CHECK(close(r.std_errors[j], f.std_errors[j], 1e-8));
      CHECK(close(r.t_values[j], f.t_values[j], 1e-8));
      CHECK(std::abs(r.p_values[j] - f.p_values[j]) <= 1e-8);
    }
  }
}

TEST_CASE("OLS matches the in-test normal-equations oracle") {
  for (const auto& f : testing::kOlsFixtures) {
    CAPTURE(f.name);
    const Eigen::MatrixXd x = to_matrix(f);
    const RegressionResult r = fit_ols(x, to_vector(f.y), 0.0);
    const testing::OracleFit o = testing::ols_oracle(to_dense(x), f.y);
    CHECK(close(r.intercept, o.intercept, 1e-8));
    for (int j = 0; j < f.p; ++j) {
      CHECK(close(r.coefficients[j], o.coefficients[j], 1e-8));
      CHECK(close(r.std_errors[j], o.std_errors[j], 1e-8));
      CHECK(close(r.t_values[j], o.t_values[j], 1e-8));
      CHECK(std::abs(r.p_values[j] - o.p_values[j]) <= 1e-8);
    }
  }
}

TEST_CASE("logistic matches fixtures and the Newton oracle within 1e-6") {
  for (const auto& f : testing::kLogisticFixtures) {
    CAPTURE(f.name);
    const Eigen::MatrixXd x = to_matrix(f);
    const RegressionResult r = fit_logistic(x, to_vector(f.y), 0.0);
    const testing::OracleFit o = testing::logistic_oracle(to_dense(x), f.y);
    CHECK(r.converged);
    CHECK(std::isinf(r.dof));
    CHECK(close(r.intercept, f.intercept, 1e-6));
    CHECK(close(r.intercept, o.intercept, 1e-6));
    for (int j = 0; j < f.p; ++j) {
      CHECK(close(r.coefficients[j], f.coefficients[j], 1e-6));
      CHECK(close(r.std_errors[j], f.std_errors[j], 1e-6));
      CHECK(close(r.t_values[j], f.t_values[j], 1e-6));
      CHECK(std::abs(r.p_values[j] - f.p_values[j]) <= 1e-6);
      CHECK(close(r.coefficients[j], o.coefficients[j], 1e-6));
      CHECK(close(r.std_errors[j], o.std_errors[j], 1e-6));
      CHECK(std::abs(r.p_values[j] - o.p_values[j]) <= 1e-6);
    }
  }
}

TEST_CASE("perfect fit reports infinite t and zero p") {
  Eigen::MatrixXd x(6, 1);
  x << 1, 2, 3, 4, 5, 6;
  const RegressionResult r = fit_ols(x, 3.0 * x.col(0), 0.0);
  CHECK(r.coefficients[0] == doctest::Approx(3.0).epsilon(1e-8));
  CHECK(r.std_errors[0] == 0.0);
  CHECK(r.t_values[0] == std::numeric_limits<double>::infinity());
  CHECK(r.p_values[0] == 0.0);
}

TEST_CASE("duplicate columns: one coefficient zeroed, sum matches single fit") {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> n01;
  const int n = 40;
  Eigen::MatrixXd one(n, 1), two(n, 2);
  Eigen::VectorXd y(n);
  for (int i = 0; i < n; ++i) {
    one(i, 0) = two(i, 0) = two(i, 1) = n01(rng);
    y(i) = 1.5 * one(i, 0) + 0.3 * n01(rng);
  }
  const RegressionResult single = fit_ols(one, y, 1e-6);
  const RegressionResult dup = fit_ols(two, y, 1e-6);
  CHECK(dup.zeroed.size() == 1);
  CHECK(((dup.coefficients[0] == 0.0) != (dup.coefficients[1] == 0.0)));
  CHECK(std::abs(dup.coefficients[0] + dup.coefficients[1] - single.coefficients[0]) <= 1e-6);
  const std::size_t z = dup.zeroed[0];
  CHECK(dup.t_values[z] == 0.0);
  CHECK(dup.p_values[z] == 1.0);
}

TEST_CASE("column scaling rescales the coefficient and keeps t") {
  const auto& f = testing::kOlsFixtures[1];
  Eigen::MatrixXd x = to_matrix(f);
  const RegressionResult base = fit_ols(x, to_vector(f.y), 0.0);
  x.col(1) *= 250.0;
  const RegressionResult scaled = fit_ols(x, to_vector(f.y), 0.0);
  CHECK(scaled.coefficients[1] == doctest::Approx(base.coefficients[1] / 250.0).epsilon(1e-9));
  CHECK(std::abs(scaled.t_values[1] - base.t_values[1]) <= 1e-6);
  CHECK(std::abs(scaled.t_values[0] - base.t_values[0]) <= 1e-6);
}

TEST_CASE("antisymmetric logistic data has zero intercept") {
  const std::vector<double> xs{0.3, 0.8, -1.2, 2.0, 0.1, -0.5};
  const int n = static_cast<int>(xs.size());
  Eigen::MatrixXd x(2 * n, 1);
  Eigen::VectorXd y(2 * n);
  for (int i = 0; i < n; ++i) {
    x(i, 0) = xs[i];
    y(i) = 1.0;
    x(n + i, 0) = -xs[i];
    y(n + i) = 0.0;
  }
  const RegressionResult r = fit_logistic(x, y, 1e-6);
  CHECK(std::abs(r.intercept) <= 1e-6);
}

TEST_CASE("perfect separation raises the warning") {
  Eigen::MatrixXd x(8, 1);
  x << -4, -3, -2, -1, 1, 2, 3, 4;
  Eigen::VectorXd y(8);
  y << 0, 0, 0, 0, 1, 1, 1, 1;
  const RegressionResult r = fit_logistic(x, y, 1e-6);
  CHECK(r.separation_warning);
  CHECK(r.coefficients[0] > 0.0);
}

TEST_CASE("task inference") {
  CHECK(infer_task({0, 1, 1, 0}).type == TaskType::kBinary);
  CHECK(infer_task({-1, 2, 2}).labels == std::vector<double>{-1, 2});
  const TaskKind mc = infer_task({0, 1, 2, 2, 1});
  CHECK(mc.type == TaskType::kMulticlass);
  CHECK(mc.n_classes == 3);
  CHECK(encode_classes({2, 0, 1}, mc) == std::vector<int>{2, 0, 1});
  CHECK(infer_task({0.5, 1.5, 2.5}).type == TaskType::kRegression);
  CHECK(infer_task({0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 10}).type == TaskType::kRegression);
  CHECK_THROWS_AS(infer_task({4, 4, 4}), StatsError);
}

TEST_CASE("two-sided p-values") {
  CHECK(two_sided_p_value(0.0, 5) == doctest::Approx(1.0));
  CHECK(two_sided_p_value(std::numeric_limits<double>::infinity(), 5) == 0.0);
  double previous = 1.0;
  for (double t = 0.25; t < 12.0; t += 0.25) {
    const double p = two_sided_p_value(t, 7);
    CHECK(p <= previous);
    CHECK(p >= 0.0);
    CHECK(two_sided_p_value(-t, 7) == p);
    CHECK(std::abs(p - testing::student_two_sided(t, 7)) <= 1e-9);
    previous = p;
  }
  for (double z : {0.5, 1.96, 3.0, 6.0}) {
    CHECK(std::abs(two_sided_p_value(z, std::numeric_limits<double>::infinity()) -
                   testing::normal_two_sided(z)) <= 1e-9);
  }
}

TEST_CASE("fits are deterministic and reject tiny samples") {
  const auto& f = testing::kOlsFixtures[3];
  const RegressionResult a = fit_ols(to_matrix(f), to_vector(f.y), 1e-6);
  const RegressionResult b = fit_ols(to_matrix(f), to_vector(f.y), 1e-6);
  CHECK(a.coefficients == b.coefficients);
  CHECK(a.t_values == b.t_values);
  Eigen::MatrixXd x(3, 2);
  x << 1, 2, 3, 4, 5, 7;
  CHECK_THROWS_AS(fit_ols(x, Eigen::Vector3d(1, 2, 3), 1e-6), StatsError);
}
