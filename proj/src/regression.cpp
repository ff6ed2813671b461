#include "shapsel/regression.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <set>
#include <string>

#include <boost/math/distributions/students_t.hpp>

#include "shapsel/error.hpp"

namespace shapsel {

namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

constexpr double kInf = std::numeric_limits<double>::infinity();

double soft_threshold(double value, double lambda) {
  if (value > lambda) return value - lambda;
  if (value < -lambda) return value + lambda;
  return 0.0;
}

double sign_of(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

// Weighted, centered normal equations: minimize 1/2 b'Gb - c'b + lambda |b|_1.
struct Quadratic {
  MatrixXd gram;
  VectorXd rhs;
  VectorXd x_mean;
  double z_mean = 0.0;
};

Quadratic centered_quadratic(const MatrixXd& x, const VectorXd& z, const VectorXd& w) {
  const double n = static_cast<double>(x.rows());
  const double w_sum = w.sum();
  Quadratic q;
  q.x_mean = (x.transpose() * w) / w_sum;
  q.z_mean = w.dot(z) / w_sum;
  const MatrixXd xc = x.rowwise() - q.x_mean.transpose();
  const MatrixXd wxc = xc.array().colwise() * w.array();
  q.gram = (wxc.transpose() * xc) / n;
  q.rhs = (wxc.transpose() * (z.array() - q.z_mean).matrix()) / n;
  return q;
}

// Columns whose centered spread is at rounding level are treated as constant.
std::vector<bool> degenerate_columns(const MatrixXd& x, const Quadratic& q) {
  std::vector<bool> out(x.cols(), false);
  for (Eigen::Index j = 0; j < x.cols(); ++j) {
    const double scale = x.col(j).cwiseAbs().maxCoeff();
    out[j] = !(std::sqrt(std::max(q.gram(j, j), 0.0)) > 1e-10 * scale);
  }
  return out;
}

struct CdResult {
  VectorXd beta;
  std::vector<std::size_t> dropped;
  int sweeps = 0;
  bool converged = true;
};

// Cyclic coordinate descent followed by an exact solve of the optimality
// conditions on the active set. Columns that remain linearly dependent on the
// active set are pinned to zero and reported in `dropped`.
CdResult solve_lasso(const Quadratic& q, double lambda, VectorXd beta, std::vector<bool> pinned,
                     double tolerance, int max_sweeps) {
  const Eigen::Index p = q.gram.rows();
  CdResult out;
  for (Eigen::Index j = 0; j < p; ++j) {
    if (pinned[j]) beta(j) = 0.0;
  }

  for (int attempt = 0; attempt <= p; ++attempt) {
    out.converged = false;
    for (out.sweeps = 1; out.sweeps <= max_sweeps; ++out.sweeps) {
      double max_delta = 0.0;
      for (Eigen::Index j = 0; j < p; ++j) {
        if (pinned[j]) continue;
        const double partial = q.rhs(j) - q.gram.row(j).dot(beta) + q.gram(j, j) * beta(j);
        const double next = soft_threshold(partial, lambda) / q.gram(j, j);
        max_delta = std::max(max_delta, std::abs(next - beta(j)));
        beta(j) = next;
      }
      if (max_delta < tolerance) {
        out.converged = true;
        break;
      }
    }

    std::vector<Eigen::Index> active;
    for (Eigen::Index j = 0; j < p; ++j) {
      if (beta(j) != 0.0) active.push_back(j);
    }
    if (active.empty()) break;
    const auto m = static_cast<Eigen::Index>(active.size());
    MatrixXd g(m, m);
    VectorXd r(m);
    for (Eigen::Index a = 0; a < m; ++a) {
      r(a) = q.rhs(active[a]) - lambda * sign_of(beta(active[a]));
      for (Eigen::Index b = 0; b < m; ++b) g(a, b) = q.gram(active[a], active[b]);
    }
    Eigen::ColPivHouseholderQR<MatrixXd> qr(g);
    if (qr.rank() < m) {
      // Pin the columns the pivoted QR found dependent, then re-run descent.
      const auto& perm = qr.colsPermutation().indices();
      for (Eigen::Index a = qr.rank(); a < m; ++a) {
        const auto j = active[perm(a)];
        pinned[j] = true;
        beta(j) = 0.0;
        out.dropped.push_back(static_cast<std::size_t>(j));
      }
      continue;
    }
    const VectorXd exact = qr.solve(r);
    bool consistent = true;
    for (Eigen::Index a = 0; a < m && consistent; ++a) {
      consistent = sign_of(exact(a)) == sign_of(beta(active[a]));
    }
    if (consistent) {
      VectorXd candidate = VectorXd::Zero(p);
      for (Eigen::Index a = 0; a < m; ++a) candidate(active[a]) = exact(a);
      for (Eigen::Index j = 0; j < p && consistent; ++j) {
        if (candidate(j) != 0.0 || pinned[j]) continue;
        const double grad = q.rhs(j) - q.gram.row(j).dot(candidate);
        consistent = std::abs(grad) <= lambda * (1.0 + 1e-9) + 1e-14;
      }
      if (consistent) {
        beta = candidate;
        out.converged = true;
      }
    }
    break;
  }
  std::sort(out.dropped.begin(), out.dropped.end());
  out.beta = std::move(beta);
  return out;
}

void check_inputs(const MatrixXd& x, const VectorXd& y) {
  if (x.rows() != y.size()) throw ArgumentError("design matrix and target row counts differ");
  if (x.rows() <= x.cols() + 1) {
    throw StatsError("insufficient observations: n = " + std::to_string(x.rows()) +
                     " must exceed p + 1 = " + std::to_string(x.cols() + 1));
  }
  if (!x.allFinite() || !y.allFinite()) throw StatsError("regression inputs contain NaN or infinity");
}

// Fills std_errors/t/p from the inverse of the active-set information matrix.
void fill_statistics(RegressionResult& result, const MatrixXd& info, double scale,
                     const std::vector<Eigen::Index>& active) {
  const auto p = result.coefficients.size();
  result.std_errors.assign(p, 0.0);
  result.t_values.assign(p, 0.0);
  result.p_values.assign(p, 1.0);
  result.zeroed.clear();
  for (std::size_t j = 0; j < p; ++j) {
    if (result.coefficients[j] == 0.0) result.zeroed.push_back(j);
  }
  if (active.empty()) return;
  const auto m = static_cast<Eigen::Index>(active.size());
  MatrixXd sub(m, m);
  for (Eigen::Index a = 0; a < m; ++a) {
    for (Eigen::Index b = 0; b < m; ++b) sub(a, b) = info(active[a], active[b]);
  }
  const MatrixXd cov = sub.ldlt().solve(MatrixXd::Identity(m, m)) * scale;
  for (Eigen::Index a = 0; a < m; ++a) {
    const auto j = static_cast<std::size_t>(active[a]);
    const double beta = result.coefficients[j];
    const double se = std::sqrt(std::max(cov(a, a), 0.0));
    result.std_errors[j] = se;
    result.t_values[j] = se > 0.0 ? beta / se : std::copysign(kInf, beta);
    result.p_values[j] = two_sided_p_value(result.t_values[j], result.dof);
  }
}

std::vector<Eigen::Index> active_set(const VectorXd& beta) {
  std::vector<Eigen::Index> active;
  for (Eigen::Index j = 0; j < beta.size(); ++j) {
    if (beta(j) != 0.0) active.push_back(j);
  }
  return active;
}

double sigmoid(double eta) {
  if (eta >= 0.0) return 1.0 / (1.0 + std::exp(-eta));
  const double e = std::exp(eta);
  return e / (1.0 + e);
}

// Mean negative log-likelihood plus the L1 penalty.
double logistic_objective(const MatrixXd& x, const VectorXd& y, double intercept,
                          const VectorXd& beta, double lambda) {
  const VectorXd eta = (x * beta).array() + intercept;
  double nll = 0.0;
  for (Eigen::Index i = 0; i < eta.size(); ++i) {
    const double e = eta(i);
    nll += std::max(e, 0.0) + std::log1p(std::exp(-std::abs(e))) - y(i) * e;
  }
  return nll / static_cast<double>(eta.size()) + lambda * beta.lpNorm<1>();
}

}  // namespace

std::string_view to_string(TaskType type) {
  switch (type) {
    case TaskType::kRegression: return "regression";
    case TaskType::kBinary: return "binary";
    case TaskType::kMulticlass: return "multiclass";
  }
  return "regression";
}

TaskKind infer_task(const std::vector<double>& y) {
  if (y.empty()) throw StatsError("degenerate target: no values");
  std::set<double> distinct;
  for (double v : y) {
    if (std::isnan(v)) throw StatsError("target contains NaN");
    distinct.insert(v);
    if (distinct.size() > 10) break;
  }
  if (distinct.size() == 1) throw StatsError("degenerate target: only one distinct value");
  TaskKind task;
  const bool integral = std::all_of(distinct.begin(), distinct.end(),
                                    [](double v) { return std::floor(v) == v; });
  if (distinct.size() == 2) {
    task.type = TaskType::kBinary;
  } else if (distinct.size() <= 10 && integral) {
    task.type = TaskType::kMulticlass;
    task.n_classes = static_cast<int>(distinct.size());
  } else {
    return task;
  }
  task.labels.assign(distinct.begin(), distinct.end());
  return task;
}

std::vector<int> encode_classes(const std::vector<double>& y, const TaskKind& task) {
  std::vector<int> out(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) {
    auto it = std::lower_bound(task.labels.begin(), task.labels.end(), y[i]);
    if (it == task.labels.end() || *it != y[i]) {
      throw StatsError("target value " + std::to_string(y[i]) + " is not one of the task's classes");
    }
    out[i] = static_cast<int>(it - task.labels.begin());
  }
  return out;
}

double two_sided_p_value(double t, double dof) {
  const double a = std::abs(t);
  if (std::isnan(a)) return 1.0;
  if (std::isinf(a)) return 0.0;
  if (std::isinf(dof)) return std::erfc(a / std::numbers::sqrt2);
  if (!(dof > 0.0)) throw StatsError("no residual degrees of freedom");
  const boost::math::students_t dist(dof);
  return std::min(1.0, 2.0 * boost::math::cdf(boost::math::complement(dist, a)));
}

RegressionResult fit_ols(const MatrixXd& x, const VectorXd& y, double l1_weight,
                         const OlsOptions& options) {
  if (!(l1_weight >= 0.0)) throw ArgumentError("l1_weight must be nonnegative");
  check_inputs(x, y);
  const Eigen::Index n = x.rows();
  const Eigen::Index p = x.cols();

  const Quadratic q = centered_quadratic(x, y, VectorXd::Ones(n));
  const CdResult cd = solve_lasso(q, l1_weight, VectorXd::Zero(p), degenerate_columns(x, q),
                                  options.tolerance, options.max_sweeps);

  RegressionResult result;
  result.coefficients.assign(cd.beta.data(), cd.beta.data() + p);
  result.intercept = q.z_mean - q.x_mean.dot(cd.beta);
  result.converged = cd.converged;
  result.iterations = cd.sweeps;

  VectorXd beta = cd.beta;
  const VectorXd residual = (y - x * beta).array() - result.intercept;
  const double rss = residual.squaredNorm();
  const double tss = (y.array() - y.mean()).matrix().squaredNorm();
  // Residuals at rounding level relative to the target spread count as a perfect fit.
  const bool perfect = rss <= 1e-20 * tss;
  if (perfect) {
    // The exact solution leaves unneeded columns at zero; drop rounding noise
    // so it does not turn into infinite t statistics.
    for (Eigen::Index j = 0; j < p; ++j) {
      if (std::abs(beta(j)) * std::sqrt(q.gram(j, j) * n) <= 1e-9 * std::sqrt(tss)) beta(j) = 0.0;
    }
    result.coefficients.assign(beta.data(), beta.data() + p);
    result.intercept = q.z_mean - q.x_mean.dot(beta);
  }
  const auto active = active_set(beta);
  result.dof = static_cast<double>(n - static_cast<Eigen::Index>(active.size()) - 1);
  const double sigma2 = perfect ? 0.0 : rss / result.dof;
  fill_statistics(result, q.gram, sigma2 / static_cast<double>(n), active);
  return result;
}

RegressionResult fit_logistic(const MatrixXd& x, const VectorXd& y, double l1_weight,
                              const LogisticOptions& options) {
  if (!(l1_weight >= 0.0)) throw ArgumentError("l1_weight must be nonnegative");
  check_inputs(x, y);
  const Eigen::Index n = x.rows();
  const Eigen::Index p = x.cols();
  for (Eigen::Index i = 0; i < n; ++i) {
    if (y(i) != 0.0 && y(i) != 1.0) throw StatsError("logistic target must be 0/1");
  }
  const double mean = y.mean();
  if (mean == 0.0 || mean == 1.0) throw StatsError("logistic target has a single class");

  double intercept = std::log(mean / (1.0 - mean));
  VectorXd beta = VectorXd::Zero(p);
  double objective = logistic_objective(x, y, intercept, beta, l1_weight);
  const std::vector<bool> degenerate =
      degenerate_columns(x, centered_quadratic(x, y, VectorXd::Ones(n)));

  RegressionResult result;
  result.converged = false;
  VectorXd weights(n);
  for (int iter = 1; iter <= options.max_iterations; ++iter) {
    result.iterations = iter;
    const VectorXd eta = (x * beta).array() + intercept;
    VectorXd z(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      const double prob = sigmoid(eta(i));
      weights(i) = std::max(prob * (1.0 - prob), 1e-12);
      z(i) = eta(i) + (y(i) - prob) / weights(i);
    }
    const Quadratic q = centered_quadratic(x, z, weights);
    const CdResult cd = solve_lasso(q, l1_weight, beta, degenerate, 1e-12, 10000);
    VectorXd next = cd.beta;
    double next_intercept = q.z_mean - q.x_mean.dot(next);

    // Halve the Newton step until the penalized objective does not increase.
    double next_objective = logistic_objective(x, y, next_intercept, next, l1_weight);
    for (int halving = 0; halving < 30 && next_objective > objective + 1e-15 * std::abs(objective);
         ++halving) {
      next = 0.5 * (next + beta);
      next_intercept = 0.5 * (next_intercept + intercept);
      next_objective = logistic_objective(x, y, next_intercept, next, l1_weight);
    }

    const double delta = std::max((next - beta).cwiseAbs().maxCoeff(),
                                  std::abs(next_intercept - intercept));
    beta = next;
    intercept = next_intercept;
    objective = next_objective;
    if (delta < options.tolerance) {
      result.converged = true;
      break;
    }
  }

  result.coefficients.assign(beta.data(), beta.data() + p);
  result.intercept = intercept;
  result.dof = kInf;
  for (Eigen::Index j = 0; j < p; ++j) {
    if (std::abs(beta(j)) > options.separation_threshold) result.separation_warning = true;
  }

  const VectorXd eta = (x * beta).array() + intercept;
  // A linear predictor that classifies every row correctly means the classes
  // are separable and the unpenalized estimate does not exist.
  bool separates = true;
  for (Eigen::Index i = 0; i < n && separates; ++i) {
    separates = y(i) > 0.5 ? eta(i) > 0.0 : eta(i) < 0.0;
  }
  if (separates) result.separation_warning = true;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double prob = sigmoid(eta(i));
    weights(i) = prob * (1.0 - prob);
  }
  if (weights.sum() <= 0.0) {
    // Fully saturated fit: no curvature left, report infinite uncertainty.
    result.separation_warning = true;
    fill_statistics(result, MatrixXd::Identity(p, p), 0.0, {});
    for (std::size_t j = 0; j < result.coefficients.size(); ++j) {
      if (result.coefficients[j] != 0.0) result.std_errors[j] = kInf;
    }
    return result;
  }
  const Quadratic info = centered_quadratic(x, VectorXd::Zero(n), weights);
  fill_statistics(result, info.gram, 1.0 / static_cast<double>(n), active_set(beta));
  return result;
}

}  // namespace shapsel
