#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

#include "shapsel/dataset.hpp"
#include "shapsel/model.hpp"

namespace shapsel {

struct TrainConfig {
  int n_rounds = 100;
  int max_depth = 4;
  double learning_rate = 0.1;
  double min_child_weight = 1.0;
  Objective objective = Objective::kRegression;
  std::int64_t seed = 0;
  double lambda_l2 = 1.0;
};

struct TrainOutcome {
  TreeEnsemble ensemble;
  /// Training loss (rmse or logloss) after each round; entry 0 is the base score alone.
  std::vector<double> loss_history;
};

/// Second-order gradient boosting with exact greedy splits. Node covers are
/// hessian sums; internal covers are the exact sum of their children.
/// Classification targets must be encoded 0..K-1.
TrainOutcome train_gbdt_traced(const Dataset& train, const TrainConfig& config);
TreeEnsemble train_gbdt(const Dataset& train, const TrainConfig& config);

/// Model with no trees whose margin is the training base score.
TreeEnsemble constant_model(const Dataset& train, const TrainConfig& config);

enum class Metric { kAccuracy, kF1, kLogLoss, kRmse };

std::string_view to_string(Metric metric);
Metric metric_from_string(std::string_view name);

/// Metric of `ensemble` on `data` (columns matched by name). Binary decisions
/// use probability >= 0.5; F1 is for the positive class. Throws ArgumentError
/// when the metric does not fit the model objective.
double evaluate(const TreeEnsemble& ensemble, const Dataset& data, Metric metric);

/// Link-space probabilities per row: [row][class] (one column for binary).
std::vector<std::vector<double>> predict_proba(const TreeEnsemble& ensemble, const Dataset& data);

double accuracy_score(const std::vector<int>& truth, const std::vector<int>& predicted);
double f1_score(const std::vector<int>& truth, const std::vector<int>& predicted);
/// Probabilities are clipped to [1e-12, 1 - 1e-12].
double binary_log_loss(const std::vector<double>& truth, const std::vector<double>& prob);
double rmse(const std::vector<double>& truth, const std::vector<double>& predicted);

}  // namespace shapsel
