#include "shapsel/treeshap.hpp"

#include <algorithm>
#include <thread>

#include "shapsel/error.hpp"

namespace shapsel {

namespace {

double subset_value(const Tree& tree, int id, std::span<const double> row,
                    const std::vector<bool>& fixed) {
  const TreeNode& node = tree.nodes[id];
  if (node.is_leaf) return node.leaf_value;
  if (fixed[node.feature]) return subset_value(tree, route(node, row), row, fixed);
  const double left = subset_value(tree, node.left, row, fixed);
  const double right = subset_value(tree, node.right, row, fixed);
  return (tree.nodes[node.left].cover / node.cover) * left +
         (tree.nodes[node.right].cover / node.cover) * right;
}

// One entry of the unique feature path: the fraction of "zero" paths (feature
// not in S, follow covers) and "one" paths (feature in S, follow the row)
// flowing through this split, and the permutation weight of subsets of size i.
struct PathElement {
  int feature = -1;
  double zero_fraction = 0.0;
  double one_fraction = 0.0;
  double weight = 0.0;
};

void extend_path(PathElement* path, int depth, double zero_fraction, double one_fraction,
                 int feature) {
  path[depth] = {feature, zero_fraction, one_fraction, depth == 0 ? 1.0 : 0.0};
  for (int i = depth - 1; i >= 0; --i) {
    path[i + 1].weight += one_fraction * path[i].weight * (i + 1) / static_cast<double>(depth + 1);
    path[i].weight = zero_fraction * path[i].weight * (depth - i) / static_cast<double>(depth + 1);
  }
}

void unwind_path(PathElement* path, int depth, int index) {
  const double one = path[index].one_fraction;
  const double zero = path[index].zero_fraction;
  double next = path[depth].weight;
  for (int i = depth - 1; i >= 0; --i) {
    if (one != 0.0) {
      const double tmp = path[i].weight;
      path[i].weight = next * (depth + 1) / static_cast<double>((i + 1) * one);
      next = tmp - path[i].weight * zero * (depth - i) / static_cast<double>(depth + 1);
    } else {
      path[i].weight = path[i].weight * (depth + 1) / static_cast<double>(zero * (depth - i));
    }
  }
  for (int i = index; i < depth; ++i) {
    path[i].feature = path[i + 1].feature;
    path[i].zero_fraction = path[i + 1].zero_fraction;
    path[i].one_fraction = path[i + 1].one_fraction;
  }
}

// Total weight the path would carry if element `index` were unwound.
double unwound_sum(const PathElement* path, int depth, int index) {
  const double one = path[index].one_fraction;
  const double zero = path[index].zero_fraction;
  double next = path[depth].weight;
  double total = 0.0;
  if (one != 0.0) {
    for (int i = depth - 1; i >= 0; --i) {
      const double tmp = next / static_cast<double>((i + 1) * one);
      total += tmp;
      next = path[i].weight - tmp * zero * (depth - i);
    }
  } else {
    for (int i = depth - 1; i >= 0; --i) {
      total += path[i].weight / (zero * (depth - i));
    }
  }
  return total * (depth + 1);
}

struct ShapWalk {
  const Tree& tree;
  std::span<const double> row;
  std::span<double> phi;
  int n_classes;

  void recurse(int id, PathElement* parent_path, int depth, double zero_fraction,
               double one_fraction, int feature) {
    // Each level works on its own copy of the path, placed after the parent's.
    PathElement* path = parent_path + depth;
    std::copy(parent_path, parent_path + depth, path);
    extend_path(path, depth, zero_fraction, one_fraction, feature);

    const TreeNode& node = tree.nodes[id];
    if (node.is_leaf) {
      for (int i = 1; i <= depth; ++i) {
        const double w = unwound_sum(path, depth, i);
        const PathElement& el = path[i];
        phi[static_cast<std::size_t>(el.feature) * n_classes + tree.class_index] +=
            w * (el.one_fraction - el.zero_fraction) * node.leaf_value;
      }
      return;
    }

    const int hot = route(node, row);
    const int cold = hot == node.left ? node.right : node.left;
    const double hot_zero = tree.nodes[hot].cover / node.cover;
    const double cold_zero = tree.nodes[cold].cover / node.cover;
    double incoming_zero = 1.0;
    double incoming_one = 1.0;

    // A feature appears at most once on the path: undo an earlier split on the
    // same feature and fold its fractions into this one.
    int k = 0;
    for (; k <= depth; ++k) {
      if (path[k].feature == node.feature) break;
    }
    if (k <= depth) {
      incoming_zero = path[k].zero_fraction;
      incoming_one = path[k].one_fraction;
      unwind_path(path, depth, k);
      --depth;
    }

    // A branch with no cover mass and off the row's path carries no weight.
    if (hot_zero * incoming_zero != 0.0 || incoming_one != 0.0) {
      recurse(hot, path, depth + 1, hot_zero * incoming_zero, incoming_one, node.feature);
    }
    if (cold_zero * incoming_zero != 0.0) {
      recurse(cold, path, depth + 1, cold_zero * incoming_zero, 0.0, node.feature);
    }
  }
};

int max_depth(const TreeEnsemble& ensemble) {
  int d = 0;
  for (const Tree& t : ensemble.trees()) d = std::max(d, t.depth());
  return d;
}

void shap_row_with_buffer(const TreeEnsemble& ensemble, std::span<const double> row,
                          std::span<double> phi, std::vector<PathElement>& buffer) {
  for (const Tree& tree : ensemble.trees()) {
    ShapWalk walk{tree, row, phi, ensemble.n_classes()};
    walk.recurse(0, buffer.data(), 0, 1.0, 1.0, -1);
  }
}

std::size_t path_buffer_size(int depth) {
  const auto d = static_cast<std::size_t>(depth) + 2;
  return d * (d + 1) / 2;
}

}  // namespace

std::vector<double> ShapMatrix::column(std::size_t feature, int k) const {
  std::vector<double> out(n_rows);
  for (std::size_t r = 0; r < n_rows; ++r) out[r] = at(r, feature, k);
  return out;
}

double expected_margin_given_subset(const TreeEnsemble& ensemble, std::span<const double> row,
                                    const std::vector<bool>& fixed, int class_index) {
  if (fixed.size() != ensemble.n_features() || row.size() != ensemble.n_features()) {
    throw ArgumentError("subset/row size does not match model feature count");
  }
  double total = ensemble.base_score().at(class_index);
  for (const Tree& tree : ensemble.trees()) {
    if (tree.class_index == class_index) total += subset_value(tree, 0, row, fixed);
  }
  return total;
}

ShapMatrix brute_force_shap(const TreeEnsemble& ensemble, std::span<const double> row) {
  const std::size_t n = ensemble.n_features();
  if (n > kMaxBruteForceFeatures) {
    throw ArgumentError("brute-force Shapley enumeration supports at most " +
                        std::to_string(kMaxBruteForceFeatures) + " features, model has " +
                        std::to_string(n));
  }
  const int n_classes = ensemble.n_classes();
  ShapMatrix out;
  out.feature_names = ensemble.feature_names();
  out.n_rows = 1;
  out.n_classes = n_classes;
  out.values.assign(n * n_classes, 0.0);
  out.base_values.assign(n_classes, 0.0);

  // weight[s] = s!(n-s-1)!/n! = 1 / (n * C(n-1, s))
  std::vector<double> weight(n, 0.0);
  for (std::size_t s = 0; s < n; ++s) {
    double binom = 1.0;
    for (std::size_t j = 1; j <= s; ++j) binom = binom * static_cast<double>(n - j) / j;
    weight[s] = 1.0 / (static_cast<double>(n) * binom);
  }

  const std::size_t n_subsets = std::size_t{1} << n;
  std::vector<bool> fixed(n);
  std::vector<double> f(n_subsets);
  for (int k = 0; k < n_classes; ++k) {
    for (std::size_t mask = 0; mask < n_subsets; ++mask) {
      for (std::size_t i = 0; i < n; ++i) fixed[i] = (mask >> i) & 1u;
      f[mask] = expected_margin_given_subset(ensemble, row, fixed, k);
    }
    out.base_values[k] = f[0];
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t bit = std::size_t{1} << i;
      double phi = 0.0;
      for (std::size_t mask = 0; mask < n_subsets; ++mask) {
        if (mask & bit) continue;
        const auto size = static_cast<std::size_t>(__builtin_popcountll(mask));
        phi += weight[size] * (f[mask | bit] - f[mask]);
      }
      out.at(0, i, k) = phi;
    }
  }
  return out;
}

void tree_shap_row(const TreeEnsemble& ensemble, std::span<const double> row,
                   std::span<double> phi) {
  if (row.size() != ensemble.n_features() ||
      phi.size() != ensemble.n_features() * static_cast<std::size_t>(ensemble.n_classes())) {
    throw ArgumentError("tree_shap_row: row or output size mismatch");
  }
  std::vector<PathElement> buffer(path_buffer_size(max_depth(ensemble)));
  shap_row_with_buffer(ensemble, row, phi, buffer);
}

std::vector<double> base_values(const TreeEnsemble& ensemble) {
  const std::vector<bool> none(ensemble.n_features(), false);
  const std::vector<double> dummy(ensemble.n_features(), 0.0);
  std::vector<double> out(ensemble.n_classes());
  for (int k = 0; k < ensemble.n_classes(); ++k) {
    out[k] = expected_margin_given_subset(ensemble, dummy, none, k);
  }
  return out;
}

ShapMatrix tree_shap(const TreeEnsemble& ensemble, const Dataset& data, unsigned n_threads) {
  const Dataset aligned = data.select(ensemble.feature_names());
  const std::size_t n_rows = aligned.n_rows();
  const std::size_t width = ensemble.n_features() * ensemble.n_classes();

  ShapMatrix out;
  out.feature_names = ensemble.feature_names();
  out.n_rows = n_rows;
  out.n_classes = ensemble.n_classes();
  out.base_values = base_values(ensemble);
  out.values.assign(n_rows * width, 0.0);

  const std::size_t buffer_size = path_buffer_size(max_depth(ensemble));
  auto work = [&](std::size_t begin, std::size_t end) {
    std::vector<PathElement> buffer(buffer_size);
    std::vector<double> row;
    for (std::size_t r = begin; r < end; ++r) {
      aligned.row(r, row);
      shap_row_with_buffer(ensemble, row, std::span<double>(out.values).subspan(r * width, width),
                           buffer);
    }
  };

  if (n_threads == 0) n_threads = std::max(1u, std::thread::hardware_concurrency());
  const std::size_t workers = std::min<std::size_t>(n_threads, std::max<std::size_t>(n_rows, 1));
  if (workers <= 1) {
    work(0, n_rows);
    return out;
  }
  {
    std::vector<std::jthread> pool;
    const std::size_t chunk = (n_rows + workers - 1) / workers;
    for (std::size_t begin = 0; begin < n_rows; begin += chunk) {
      pool.emplace_back(work, begin, std::min(n_rows, begin + chunk));
    }
  }
  return out;
}

}  // namespace shapsel
