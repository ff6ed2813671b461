#include "shapsel/model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "shapsel/error.hpp"

namespace shapsel {

namespace {

using nlohmann::json;

constexpr double kCoverTolerance = 1e-6;

std::string where(std::size_t tree, int node) {
  return "tree " + std::to_string(tree) + " node " + std::to_string(node) + ": ";
}

void validate_tree(const Tree& tree, std::size_t tree_id, std::size_t n_features,
                   int n_classes) {
  if (tree.class_index < 0 || tree.class_index >= n_classes) {
    throw ModelError("tree " + std::to_string(tree_id) + ": class_index " +
                     std::to_string(tree.class_index) + " outside [0, " +
                     std::to_string(n_classes) + ")");
  }
  const auto& nodes = tree.nodes;
  if (nodes.empty()) throw ModelError("tree " + std::to_string(tree_id) + ": no nodes");
  const int n = static_cast<int>(nodes.size());

  std::vector<int> parent_count(nodes.size(), 0);
  for (int id = 0; id < n; ++id) {
    const TreeNode& node = nodes[id];
    if (!std::isfinite(node.cover) || node.cover < 0.0) {
      throw ModelError(where(tree_id, id) + "cover must be finite and nonnegative");
    }
    if (node.is_leaf) {
      if (!std::isfinite(node.leaf_value)) {
        throw ModelError(where(tree_id, id) + "leaf value must be finite");
      }
      continue;
    }
    if (node.feature < 0 || static_cast<std::size_t>(node.feature) >= n_features) {
      throw ModelError(where(tree_id, id) + "split_feature " + std::to_string(node.feature) +
                       " out of range (n_features = " + std::to_string(n_features) + ")");
    }
    if (std::isnan(node.threshold)) {
      throw ModelError(where(tree_id, id) + "threshold is NaN");
    }
    for (int child : {node.left, node.right}) {
      if (child <= 0 || child >= n || child == id) {
        throw ModelError(where(tree_id, id) + "bad child id " + std::to_string(child));
      }
      ++parent_count[child];
    }
    if (node.left == node.right) {
      throw ModelError(where(tree_id, id) + "left and right children are identical");
    }
    if (!(node.cover > 0.0)) {
      throw ModelError(where(tree_id, id) + "internal node cover must be positive");
    }
    const double sum = nodes[node.left].cover + nodes[node.right].cover;
    if (std::abs(sum - node.cover) > kCoverTolerance * node.cover) {
      std::ostringstream msg;
      msg.precision(17);
      msg << where(tree_id, id) << "cover " << node.cover << " != children sum " << sum;
      throw ModelError(msg.str());
    }
  }
  if (!(nodes[0].cover > 0.0)) throw ModelError(where(tree_id, 0) + "root cover must be positive");

  for (int id = 1; id < n; ++id) {
    if (parent_count[id] != 1) {
      throw ModelError(where(tree_id, id) + "node has " + std::to_string(parent_count[id]) +
                       " parents (expected 1)");
    }
  }
  // Every non-root node has one parent and the root has none, so the graph is a
  // tree exactly when everything is reachable from the root.
  std::vector<bool> seen(nodes.size(), false);
  std::vector<int> stack{0};
  int visited = 0;
  while (!stack.empty()) {
    const int id = stack.back();
    stack.pop_back();
    if (seen[id]) throw ModelError(where(tree_id, id) + "cycle detected");
    seen[id] = true;
    ++visited;
    if (!nodes[id].is_leaf) {
      stack.push_back(nodes[id].left);
      stack.push_back(nodes[id].right);
    }
  }
  if (visited != n) {
    throw ModelError("tree " + std::to_string(tree_id) + ": unreachable nodes (cycle detached from root)");
  }
}

template <typename T>
T required(const json& obj, const char* key, const std::string& ctx) {
  if (!obj.is_object() || !obj.contains(key)) {
    throw ModelError(ctx + "missing field \"" + key + "\"");
  }
  try {
    return obj.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ModelError(ctx + "field \"" + key + "\" has wrong type: " + e.what());
  }
}

double required_number(const json& obj, const char* key, const std::string& ctx) {
  if (!obj.contains(key)) throw ModelError(ctx + "missing field \"" + key + "\"");
  const json& v = obj.at(key);
  if (!v.is_number()) throw ModelError(ctx + "field \"" + key + "\" must be a number");
  return v.get<double>();
}

}  // namespace

std::string_view to_string(Objective objective) {
  switch (objective) {
    case Objective::kRegression: return "regression";
    case Objective::kBinaryLogistic: return "binary_logistic";
    case Objective::kMulticlassSoftmax: return "multiclass_softmax";
  }
  return "regression";
}

Objective objective_from_string(std::string_view name) {
  if (name == "regression") return Objective::kRegression;
  if (name == "binary_logistic") return Objective::kBinaryLogistic;
  if (name == "multiclass_softmax") return Objective::kMulticlassSoftmax;
  throw ModelError("unknown objective \"" + std::string(name) + "\"");
}

int Tree::leaf_for(std::span<const double> row) const {
  int id = 0;
  while (!nodes[id].is_leaf) id = route(nodes[id], row);
  return id;
}

int Tree::depth() const {
  std::vector<std::pair<int, int>> stack{{0, 0}};
  int best = 0;
  while (!stack.empty()) {
    auto [id, d] = stack.back();
    stack.pop_back();
    best = std::max(best, d);
    if (!nodes[id].is_leaf) {
      stack.emplace_back(nodes[id].left, d + 1);
      stack.emplace_back(nodes[id].right, d + 1);
    }
  }
  return best;
}

TreeEnsemble::TreeEnsemble(std::vector<std::string> feature_names, Objective objective,
                           std::vector<double> base_score, std::vector<Tree> trees)
    : feature_names_(std::move(feature_names)),
      objective_(objective),
      base_score_(std::move(base_score)),
      trees_(std::move(trees)) {
  const int k = n_classes();
  if (k < 1) throw ModelError("base_score must have at least one entry");
  const bool single = objective_ != Objective::kMulticlassSoftmax;
  if (single != (k == 1)) {
    throw ModelError("objective " + std::string(to_string(objective_)) +
                     " inconsistent with n_classes = " + std::to_string(k));
  }
  for (double b : base_score_) {
    if (!std::isfinite(b)) throw ModelError("base_score entries must be finite");
  }
  std::set<std::string> names;
  for (const auto& name : feature_names_) {
    if (!names.insert(name).second) throw ModelError("duplicate feature name \"" + name + "\"");
  }
  for (std::size_t t = 0; t < trees_.size(); ++t) {
    validate_tree(trees_[t], t, feature_names_.size(), k);
  }
}

std::vector<double> TreeEnsemble::predict_margin(std::span<const double> row) const {
  if (row.size() != feature_names_.size()) {
    throw ArgumentError("row has " + std::to_string(row.size()) + " values, model expects " +
                        std::to_string(feature_names_.size()));
  }
  std::vector<double> margin = base_score_;
  for (const Tree& tree : trees_) {
    margin[tree.class_index] += tree.nodes[tree.leaf_for(row)].leaf_value;
  }
  return margin;
}

std::vector<bool> TreeEnsemble::used_features(int class_index) const {
  std::vector<bool> used(feature_names_.size(), false);
  for (const Tree& tree : trees_) {
    if (tree.class_index != class_index) continue;
    for (const TreeNode& node : tree.nodes) {
      if (!node.is_leaf) used[node.feature] = true;
    }
  }
  return used;
}

TreeEnsemble parse_model(std::string_view json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ModelError(std::string("malformed JSON: ") + e.what());
  }
  if (!doc.is_object()) throw ModelError("model document must be a JSON object");

  auto names = required<std::vector<std::string>>(doc, "feature_names", "");
  const int n_classes = required<int>(doc, "n_classes", "");
  const auto objective = objective_from_string(required<std::string>(doc, "objective", ""));
  auto base_score = required<std::vector<double>>(doc, "base_score", "");
  if (static_cast<int>(base_score.size()) != n_classes) {
    throw ModelError("base_score has " + std::to_string(base_score.size()) +
                     " entries but n_classes = " + std::to_string(n_classes));
  }
  if (!doc.contains("trees") || !doc["trees"].is_array()) {
    throw ModelError("missing field \"trees\" (array)");
  }

  std::vector<Tree> trees;
  const json& jtrees = doc["trees"];
  for (std::size_t t = 0; t < jtrees.size(); ++t) {
    const std::string ctx = "tree " + std::to_string(t) + ": ";
    const json& jt = jtrees[t];
    Tree tree;
    tree.class_index = required<int>(jt, "class_index", ctx);
    if (!jt.contains("nodes") || !jt["nodes"].is_array()) {
      throw ModelError(ctx + "missing field \"nodes\" (array)");
    }
    const json& jnodes = jt["nodes"];
    tree.nodes.resize(jnodes.size());
    std::vector<bool> filled(jnodes.size(), false);
    for (std::size_t i = 0; i < jnodes.size(); ++i) {
      const json& jn = jnodes[i];
      const int id = required<int>(jn, "id", ctx + "node entry " + std::to_string(i) + ": ");
      if (id < 0 || static_cast<std::size_t>(id) >= jnodes.size()) {
        throw ModelError(where(t, id) + "id out of range [0, " + std::to_string(jnodes.size()) + ")");
      }
      if (filled[id]) throw ModelError(where(t, id) + "duplicate node id");
      filled[id] = true;
      const std::string nctx = where(t, id);
      TreeNode node;
      node.cover = required_number(jn, "cover", nctx);
      if (jn.contains("leaf")) {
        node.is_leaf = true;
        node.leaf_value = required_number(jn, "leaf", nctx);
      } else {
        node.is_leaf = false;
        node.feature = required<int>(jn, "split_feature", nctx);
        node.threshold = required_number(jn, "threshold", nctx);
        node.left = required<int>(jn, "left", nctx);
        node.right = required<int>(jn, "right", nctx);
        const auto missing = required<std::string>(jn, "missing", nctx);
        if (missing == "left") {
          node.missing = Branch::kLeft;
        } else if (missing == "right") {
          node.missing = Branch::kRight;
        } else {
          throw ModelError(nctx + "missing must be \"left\" or \"right\"");
        }
      }
      tree.nodes[id] = node;
    }
    trees.push_back(std::move(tree));
  }
  return TreeEnsemble(std::move(names), objective, std::move(base_score), std::move(trees));
}

TreeEnsemble load_model(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ModelError("cannot open model file " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_model(buf.str());
}

std::string serialize_model(const TreeEnsemble& ensemble) {
  nlohmann::ordered_json doc;
  doc["feature_names"] = ensemble.feature_names();
  doc["n_classes"] = ensemble.n_classes();
  doc["objective"] = std::string(to_string(ensemble.objective()));
  doc["base_score"] = ensemble.base_score();
  auto trees = nlohmann::ordered_json::array();
  for (const Tree& tree : ensemble.trees()) {
    nlohmann::ordered_json jt;
    jt["class_index"] = tree.class_index;
    auto nodes = nlohmann::ordered_json::array();
    for (std::size_t id = 0; id < tree.nodes.size(); ++id) {
      const TreeNode& n = tree.nodes[id];
      nlohmann::ordered_json jn;
      jn["id"] = id;
      if (n.is_leaf) {
        jn["leaf"] = n.leaf_value;
      } else {
        jn["split_feature"] = n.feature;
        jn["threshold"] = n.threshold;
        jn["left"] = n.left;
        jn["right"] = n.right;
        jn["missing"] = n.missing == Branch::kLeft ? "left" : "right";
      }
      jn["cover"] = n.cover;
      nodes.push_back(std::move(jn));
    }
    jt["nodes"] = std::move(nodes);
    trees.push_back(std::move(jt));
  }
  doc["trees"] = std::move(trees);
  return doc.dump(1) + "\n";
}

void save_model(const TreeEnsemble& ensemble, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ModelError("cannot write model file " + path);
  out << serialize_model(ensemble);
  if (!out) throw ModelError("failed writing model file " + path);
}

}  // namespace shapsel
