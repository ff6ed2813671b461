#pragma once

#include <cstddef>
#include <limits>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace shapsel {

/// Coefficients and classical Wald statistics for one significance regression.
///
/// `dof` is the residual degrees of freedom for OLS and +infinity for the
/// logistic z-test. A zero standard error with a nonzero coefficient (perfect
/// fit) yields t = +/-infinity and p = 0. Coefficients shrunk to exactly zero by
/// the L1 penalty report std_error 0, t 0 and p 1.
struct RegressionResult {
  std::vector<double> coefficients;
  double intercept = 0.0;
  std::vector<double> std_errors;
  std::vector<double> t_values;
  std::vector<double> p_values;
  double dof = std::numeric_limits<double>::infinity();
  bool converged = true;
  int iterations = 0;
  bool separation_warning = false;
  /// Indices of regressors whose coefficient is exactly zero.
  std::vector<std::size_t> zeroed;
};

enum class TaskType { kRegression, kBinary, kMulticlass };

struct TaskKind {
  TaskType type = TaskType::kRegression;
  /// Number of classes for multiclass tasks, 1 otherwise.
  int n_classes = 1;
  /// Sorted distinct target values; class c corresponds to labels[c]
  /// (binary and multiclass only).
  std::vector<double> labels;
};

std::string_view to_string(TaskType type);

/// binary: exactly two distinct values; multiclass: 3..10 distinct integral
/// values; otherwise regression. Throws StatsError for a constant target.
TaskKind infer_task(const std::vector<double>& y);

/// Maps raw target values to class indices 0..K-1 via `task.labels`.
std::vector<int> encode_classes(const std::vector<double>& y, const TaskKind& task);

struct OlsOptions {
  double tolerance = 1e-10;
  int max_sweeps = 10000;
};

/// Least squares with unpenalized intercept minimizing
/// 1/2 RSS/n + l1_weight * sum |beta| by coordinate descent. Standard errors are
/// the unpenalized sigma^2 (X'X)^-1 over the nonzero columns.
/// Throws StatsError if n <= p + 1 or the active design is singular.
RegressionResult fit_ols(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, double l1_weight,
                         const OlsOptions& options = {});

struct LogisticOptions {
  double tolerance = 1e-8;
  int max_iterations = 100;
  /// |coefficient| above this (log-odds units) flags quasi-separation.
  double separation_threshold = 30.0;
};

/// Penalized logistic regression (IRLS with a soft-thresholded inner solve).
/// `y` holds 0/1 labels. Standard errors come from the inverse Fisher
/// information over the nonzero columns; t_values are Wald z statistics.
RegressionResult fit_logistic(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                              double l1_weight, const LogisticOptions& options = {});

/// Two-sided Student-t tail probability P(|T| >= |t|); dof = inf uses the normal.
double two_sided_p_value(double t, double dof);

}  // namespace shapsel
