#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "shapsel/dataset.hpp"
#include "shapsel/model.hpp"

namespace shapsel {

/// Per-row, per-feature, per-class Shapley values of the ensemble margin.
///
/// Values are stored row-major as [row][feature][class]. `base_values[k]` is the
/// cover-weighted expected margin of class k, identical for every row, so that
/// for each row `sum_i value(r, i, k) + base_values[k]` is the margin of class k.
struct ShapMatrix {
  std::vector<std::string> feature_names;
  std::size_t n_rows = 0;
  int n_classes = 1;
  std::vector<double> base_values;
  std::vector<double> values;

  std::size_t n_features() const { return feature_names.size(); }

  double& at(std::size_t row, std::size_t feature, int k) {
    return values[(row * n_features() + feature) * n_classes + k];
  }
  double at(std::size_t row, std::size_t feature, int k) const {
    return values[(row * n_features() + feature) * n_classes + k];
  }

  /// Column of Shapley values for one feature and class, over all rows.
  std::vector<double> column(std::size_t feature, int k) const;
};

/// Path-dependent f(S): walk every tree of class `class_index`; at splits on a
/// feature in `fixed` follow the row, elsewhere average both children by cover.
/// Includes base_score.
double expected_margin_given_subset(const TreeEnsemble& ensemble, std::span<const double> row,
                                    const std::vector<bool>& fixed, int class_index);

/// Shapley values by direct subset enumeration; the test oracle for tree_shap.
/// Throws ArgumentError when the model has more than kMaxBruteForceFeatures features.
inline constexpr std::size_t kMaxBruteForceFeatures = 20;
ShapMatrix brute_force_shap(const TreeEnsemble& ensemble, std::span<const double> row);

/// Polynomial-time exact path-dependent TreeSHAP for a single row.
/// `phi` has n_features * n_classes entries laid out [feature][class] and is
/// accumulated into (not cleared).
void tree_shap_row(const TreeEnsemble& ensemble, std::span<const double> row,
                   std::span<double> phi);

/// Expected margin per class under the cover distribution (the SHAP base values).
std::vector<double> base_values(const TreeEnsemble& ensemble);

/// Shapley values for every row of `data`. Columns are matched to the model's
/// features by name; extra columns are ignored. Rows are split across
/// `n_threads` workers (0 = hardware concurrency); the result does not depend
/// on the worker count.
ShapMatrix tree_shap(const TreeEnsemble& ensemble, const Dataset& data, unsigned n_threads = 1);

}  // namespace shapsel
