#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "shapsel/dataset.hpp"
#include "shapsel/model.hpp"
#include "shapsel/regression.hpp"
#include "shapsel/treeshap.hpp"

namespace shapsel {

/// Statistics a feature carried in the regression from which it was eliminated.
struct EliminationRecord {
  std::string feature;
  /// 1 = eliminated first.
  int removal_rank = 0;
  /// Signed t (multiclass: the largest per-class t).
  double t_value = 0.0;
  int coefficient_sign = 0;
  double p_raw = 1.0;
  /// Bonferroni-adjusted for multiclass, equal to p_raw otherwise.
  double p_adjusted = 1.0;
  std::optional<int> class_of_max_t;
};

struct SelectOptions {
  double threshold = 0.05;
  /// Overrides the task inferred from the target.
  std::optional<TaskType> task;
  double l1_weight = 1e-6;
  unsigned n_threads = 1;
  std::int64_t seed = 0;
};

struct SelectionReport {
  TaskKind task;
  double threshold = 0.05;
  double l1_weight = 1e-6;
  std::int64_t seed = 0;
  std::vector<EliminationRecord> records;
  std::vector<std::string> selected;
  /// Number of regressions fitted during elimination.
  int n_fits = 0;
};

/// Per-feature aggregate over the one-vs-rest class regressions.
struct ClassAggregate {
  double t_max = 0.0;
  double p_raw = 1.0;
  double p_adjusted = 1.0;
  int sign = 0;
  int class_of_max_t = 0;
};

/// Largest signed t across classes (ties: lowest class). Positive maxima get
/// p_adjusted = min(1, K * p); nonpositive maxima are marked for discard with
/// p_adjusted = 1. Throws ArgumentError if the results disagree in width or K < 2.
std::vector<ClassAggregate> aggregate_multiclass(const std::vector<RegressionResult>& per_class,
                                                 int n_classes);

/// Recursive elimination on precomputed Shapley values. `target` holds raw
/// target values; the task must already be resolved.
std::vector<EliminationRecord> eliminate(const ShapMatrix& shap, const std::vector<double>& target,
                                         const TaskKind& task, double l1_weight,
                                         int* n_fits = nullptr);

/// Features with p_adjusted < threshold and a positive coefficient.
std::vector<std::string> select_features(const std::vector<EliminationRecord>& records,
                                         double threshold);

/// Resolves the task for `target` against the model (inferred unless overridden).
TaskKind resolve_task(const TreeEnsemble& ensemble, const std::vector<double>& target,
                      std::optional<TaskType> requested);

/// Full procedure: Shapley values on the validation set, elimination to
/// exhaustion, then thresholding.
SelectionReport shap_select(const TreeEnsemble& ensemble, const Dataset& validation,
                            const SelectOptions& options = {});

struct SweepPoint {
  double threshold = 0.0;
  std::vector<std::string> selected;
  std::optional<double> metric;
};

/// Evaluates a downstream metric for a selected subset (e.g. retrain + score).
using SubsetMetric = std::function<double(const std::vector<std::string>&)>;

/// Eliminates once, then thresholds the fixed records at every value.
std::vector<SweepPoint> threshold_sweep(const TreeEnsemble& ensemble, const Dataset& validation,
                                        const std::vector<double>& thresholds,
                                        const SelectOptions& options = {},
                                        const SubsetMetric& metric = {});

/// Report JSON with stable key order and 17-significant-digit floats.
std::string report_to_json(const SelectionReport& report);

}  // namespace shapsel
