#include "shapsel/selection.hpp"

#include <algorithm>
#include <cfloat>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "shapsel/error.hpp"

namespace shapsel {

namespace {

struct FeatureStat {
  double t = 0.0;
  int sign = 0;
  double p_raw = 1.0;
  double p_adjusted = 1.0;
  std::optional<int> class_of_max_t;
};

// Elimination ordering uses t = 0 for coefficients the L1 penalty zeroed.
FeatureStat single_stat(const RegressionResult& r, std::size_t j) {
  FeatureStat s;
  const double beta = r.coefficients[j];
  if (beta == 0.0) return s;
  s.t = r.t_values[j];
  s.sign = beta > 0.0 ? 1 : -1;
  s.p_raw = r.p_values[j];
  s.p_adjusted = s.p_raw;
  return s;
}

Eigen::MatrixXd design(const ShapMatrix& shap, const std::vector<std::size_t>& features, int k) {
  Eigen::MatrixXd x(static_cast<Eigen::Index>(shap.n_rows),
                    static_cast<Eigen::Index>(features.size()));
  for (std::size_t r = 0; r < shap.n_rows; ++r) {
    for (std::size_t c = 0; c < features.size(); ++c) {
      x(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = shap.at(r, features[c], k);
    }
  }
  return x;
}

std::string json_number(double v) {
  if (std::isnan(v)) return "null";
  if (std::isinf(v)) v = v > 0 ? DBL_MAX : -DBL_MAX;
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string json_string(const std::string& s) { return nlohmann::json(s).dump(); }

void check_threshold(double threshold) {
  if (!(threshold > 0.0 && threshold <= 1.0)) {
    throw ArgumentError("threshold must be in (0,1]");
  }
}

}  // namespace

std::vector<ClassAggregate> aggregate_multiclass(const std::vector<RegressionResult>& per_class,
                                                 int n_classes) {
  if (n_classes < 2) throw ArgumentError("multiclass aggregation needs at least 2 classes");
  if (static_cast<int>(per_class.size()) != n_classes) {
    throw ArgumentError("expected one regression result per class");
  }
  const std::size_t p = per_class.front().coefficients.size();
  for (const auto& r : per_class) {
    if (r.coefficients.size() != p || r.t_values.size() != p || r.p_values.size() != p) {
      throw ArgumentError("inconsistent feature lists across class regressions");
    }
  }
  std::vector<ClassAggregate> out(p);
  for (std::size_t j = 0; j < p; ++j) {
    ClassAggregate& agg = out[j];
    FeatureStat best = single_stat(per_class[0], j);
    agg.class_of_max_t = 0;
    for (int k = 1; k < n_classes; ++k) {
      const FeatureStat s = single_stat(per_class[k], j);
      if (s.t > best.t) {
        best = s;
        agg.class_of_max_t = k;
      }
    }
    agg.t_max = best.t;
    agg.p_raw = best.p_raw;
    if (best.t > 0.0) {
      agg.sign = 1;
      agg.p_adjusted = std::min(1.0, n_classes * best.p_raw);
    } else {
      // Zero only when the best class coefficient was shrunk to exactly zero.
      agg.sign = best.t < 0.0 ? -1 : 0;
      agg.p_adjusted = 1.0;
    }
  }
  return out;
}

std::vector<EliminationRecord> eliminate(const ShapMatrix& shap, const std::vector<double>& target,
                                         const TaskKind& task, double l1_weight, int* n_fits) {
  if (target.size() != shap.n_rows) throw ArgumentError("target length does not match Shapley rows");
  const int k_task = task.type == TaskType::kMulticlass ? task.n_classes : 1;
  if (shap.n_classes != k_task) {
    throw ArgumentError("model produces " + std::to_string(shap.n_classes) +
                        " class outputs but the task has " + std::to_string(k_task));
  }

  std::vector<int> classes;
  Eigen::VectorXd y(static_cast<Eigen::Index>(target.size()));
  if (task.type == TaskType::kRegression) {
    for (std::size_t i = 0; i < target.size(); ++i) y(static_cast<Eigen::Index>(i)) = target[i];
  } else {
    classes = encode_classes(target, task);
    for (std::size_t i = 0; i < target.size(); ++i) y(static_cast<Eigen::Index>(i)) = classes[i];
  }

  // Regressors are always laid out in name order so the fits do not depend on
  // the column order of the input.
  std::vector<std::size_t> remaining(shap.n_features());
  std::iota(remaining.begin(), remaining.end(), 0);
  std::sort(remaining.begin(), remaining.end(), [&](std::size_t a, std::size_t b) {
    return shap.feature_names[a] < shap.feature_names[b];
  });

  std::vector<EliminationRecord> records;
  int fits = 0;
  int rank = 0;
  while (!remaining.empty()) {
    std::vector<FeatureStat> stats(remaining.size());
    try {
      if (task.type == TaskType::kMulticlass) {
        std::vector<RegressionResult> per_class;
        per_class.reserve(task.n_classes);
        for (int k = 0; k < task.n_classes; ++k) {
          Eigen::VectorXd yk(y.size());
          for (Eigen::Index i = 0; i < y.size(); ++i) yk(i) = classes[i] == k ? 1.0 : 0.0;
          per_class.push_back(fit_logistic(design(shap, remaining, k), yk, l1_weight));
          ++fits;
        }
        const auto agg = aggregate_multiclass(per_class, task.n_classes);
        for (std::size_t c = 0; c < remaining.size(); ++c) {
          stats[c] = {agg[c].t_max, agg[c].sign, agg[c].p_raw, agg[c].p_adjusted,
                      agg[c].class_of_max_t};
        }
      } else {
        const Eigen::MatrixXd x = design(shap, remaining, 0);
        const RegressionResult r = task.type == TaskType::kBinary ? fit_logistic(x, y, l1_weight)
                                                                  : fit_ols(x, y, l1_weight);
        ++fits;
        for (std::size_t c = 0; c < remaining.size(); ++c) stats[c] = single_stat(r, c);
      }
    } catch (const StatsError& e) {
      throw StatsError("elimination step " + std::to_string(rank + 1) + " (" +
                       std::to_string(remaining.size()) + " features remaining): " + e.what());
    }

    // Lowest signed t; ties go to the lexicographically last name, which is the
    // later position since `remaining` is name-sorted.
    std::size_t worst = 0;
    for (std::size_t c = 1; c < remaining.size(); ++c) {
      if (stats[c].t <= stats[worst].t) worst = c;
    }
    const FeatureStat& s = stats[worst];
    records.push_back({shap.feature_names[remaining[worst]], ++rank, s.t, s.sign, s.p_raw,
                       s.p_adjusted, s.class_of_max_t});
    remaining.erase(remaining.begin() + static_cast<std::ptrdiff_t>(worst));
  }
  if (n_fits) *n_fits = fits;
  return records;
}

std::vector<std::string> select_features(const std::vector<EliminationRecord>& records,
                                         double threshold) {
  std::vector<std::string> selected;
  for (auto it = records.rbegin(); it != records.rend(); ++it) {
    if (it->coefficient_sign == 1 && it->p_adjusted < threshold) selected.push_back(it->feature);
  }
  return selected;
}

TaskKind resolve_task(const TreeEnsemble& ensemble, const std::vector<double>& target,
                      std::optional<TaskType> requested) {
  TaskKind task;
  if (requested == TaskType::kRegression) {
    infer_task(target);  // rejects a constant target
  } else {
    task = infer_task(target);
    if (requested && *requested != task.type) {
      if (*requested == TaskType::kBinary || task.type == TaskType::kRegression) {
        const std::string found = task.type == TaskType::kRegression
                                      ? std::string("a continuous target")
                                      : std::to_string(task.labels.size()) + " target classes";
        throw ArgumentError("task " + std::string(to_string(*requested)) + " does not fit " + found);
      }
      // Two integral classes requested as multiclass.
      task.type = TaskType::kMulticlass;
      task.n_classes = static_cast<int>(task.labels.size());
    }
  }
  const int k_task = task.type == TaskType::kMulticlass ? task.n_classes : 1;
  if (ensemble.n_classes() != k_task) {
    throw ArgumentError("model has " + std::to_string(ensemble.n_classes()) +
                        " class outputs but the " + std::string(to_string(task.type)) +
                        " task needs " + std::to_string(k_task));
  }
  return task;
}

SelectionReport shap_select(const TreeEnsemble& ensemble, const Dataset& validation,
                            const SelectOptions& options) {
  check_threshold(options.threshold);
  if (!(options.l1_weight >= 0.0)) throw ArgumentError("l1 weight must be nonnegative");
  if (validation.n_rows() < ensemble.n_features() + 2) {
    throw StatsError("too few rows: " + std::to_string(validation.n_rows()) +
                     " validation rows for " + std::to_string(ensemble.n_features()) +
                     " features (need at least n_features + 2)");
  }
  SelectionReport report;
  report.task = resolve_task(ensemble, validation.target(), options.task);
  report.threshold = options.threshold;
  report.l1_weight = options.l1_weight;
  report.seed = options.seed;

  const ShapMatrix shap = tree_shap(ensemble, validation, options.n_threads);
  report.records = eliminate(shap, validation.target(), report.task, options.l1_weight, &report.n_fits);
  report.selected = select_features(report.records, options.threshold);
  return report;
}

std::vector<SweepPoint> threshold_sweep(const TreeEnsemble& ensemble, const Dataset& validation,
                                        const std::vector<double>& thresholds,
                                        const SelectOptions& options, const SubsetMetric& metric) {
  for (double t : thresholds) check_threshold(t);
  SelectOptions base = options;
  base.threshold = 1.0;
  const SelectionReport report = shap_select(ensemble, validation, base);
  std::vector<SweepPoint> out;
  out.reserve(thresholds.size());
  for (double t : thresholds) {
    SweepPoint point{t, select_features(report.records, t), std::nullopt};
    if (metric) point.metric = metric(point.selected);
    out.push_back(std::move(point));
  }
  return out;
}

std::string report_to_json(const SelectionReport& report) {
  std::ostringstream out;
  out << "{\n";
  out << "  \"task\": " << json_string(std::string(to_string(report.task.type))) << ",\n";
  out << "  \"threshold\": " << json_number(report.threshold) << ",\n";
  out << "  \"selected\": [";
  for (std::size_t i = 0; i < report.selected.size(); ++i) {
    out << (i ? ", " : "") << json_string(report.selected[i]);
  }
  out << "],\n";
  out << "  \"records\": [";
  for (std::size_t i = 0; i < report.records.size(); ++i) {
    const EliminationRecord& r = report.records[i];
    out << (i ? ",\n" : "\n") << "    {\"feature\": " << json_string(r.feature)
        << ", \"removal_rank\": " << r.removal_rank << ", \"t_value\": " << json_number(r.t_value)
        << ", \"coefficient_sign\": " << r.coefficient_sign
        << ", \"p_adjusted\": " << json_number(r.p_adjusted) << ", \"class_of_max_t\": "
        << (r.class_of_max_t ? std::to_string(*r.class_of_max_t) : "null") << "}";
  }
  out << (report.records.empty() ? "],\n" : "\n  ],\n");
  out << "  \"config\": {\"l1_weight\": " << json_number(report.l1_weight)
      << ", \"threshold\": " << json_number(report.threshold) << ", \"seed\": " << report.seed
      << ", \"n_classes\": " << report.task.n_classes << "}\n";
  out << "}\n";
  return out.str();
}

}  // namespace shapsel
