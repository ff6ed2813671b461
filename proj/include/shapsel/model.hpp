#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace shapsel {

enum class Objective { kRegression, kBinaryLogistic, kMulticlassSoftmax };

std::string_view to_string(Objective objective);
Objective objective_from_string(std::string_view name);

enum class Branch : std::uint8_t { kLeft, kRight };

/// One node of a binary decision tree. Internal nodes route a row left iff
/// `row[feature] < threshold`; NaN follows `missing`.
struct TreeNode {
  bool is_leaf = true;
  int feature = -1;
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  Branch missing = Branch::kLeft;
  double leaf_value = 0.0;
  double cover = 0.0;
};

/// Nodes are stored by id; node 0 is the root.
struct Tree {
  int class_index = 0;
  std::vector<TreeNode> nodes;

  /// Id of the leaf reached by `row`.
  int leaf_for(std::span<const double> row) const;
  int depth() const;
};

/// Next node for `row` at internal node `node`.
inline int route(const TreeNode& node, std::span<const double> row) {
  const double v = row[static_cast<std::size_t>(node.feature)];
  if (v != v) return node.missing == Branch::kLeft ? node.left : node.right;
  return v < node.threshold ? node.left : node.right;
}

/// Immutable forest of regression trees producing margin-space scores.
class TreeEnsemble {
 public:
  TreeEnsemble() = default;

  /// Validates every structural invariant; throws ModelError on failure.
  TreeEnsemble(std::vector<std::string> feature_names, Objective objective,
               std::vector<double> base_score, std::vector<Tree> trees);

  const std::vector<std::string>& feature_names() const { return feature_names_; }
  std::size_t n_features() const { return feature_names_.size(); }
  int n_classes() const { return static_cast<int>(base_score_.size()); }
  Objective objective() const { return objective_; }
  const std::vector<double>& base_score() const { return base_score_; }
  const std::vector<Tree>& trees() const { return trees_; }

  /// Margin per class. Throws ArgumentError on row length mismatch.
  std::vector<double> predict_margin(std::span<const double> row) const;

  /// Feature indices used by at least one split of a tree of `class_index`.
  std::vector<bool> used_features(int class_index) const;

 private:
  std::vector<std::string> feature_names_;
  Objective objective_ = Objective::kRegression;
  std::vector<double> base_score_;
  std::vector<Tree> trees_;
};

/// Parses the portable JSON model document. Errors name the tree and node.
TreeEnsemble parse_model(std::string_view json_text);
TreeEnsemble load_model(const std::string& path);

std::string serialize_model(const TreeEnsemble& ensemble);
void save_model(const TreeEnsemble& ensemble, const std::string& path);

}  // namespace shapsel
