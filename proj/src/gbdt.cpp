#include "shapsel/gbdt.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "shapsel/error.hpp"

namespace shapsel {

namespace {

constexpr double kProbClip = 1e-12;
constexpr double kMinHessian = 1e-16;

struct GradPair {
  double g = 0.0;
  double h = 0.0;
  GradPair& operator+=(const GradPair& o) {
    g += o.g;
    h += o.h;
    return *this;
  }
};

struct Split {
  double gain = 0.0;
  int feature = -1;
  double threshold = 0.0;
  Branch missing = Branch::kRight;
};

// Per-feature row orderings shared by every tree.
struct SortedColumns {
  std::vector<std::vector<std::uint32_t>> present;  // non-missing rows by ascending value
  std::vector<std::vector<std::uint32_t>> missing;
};

SortedColumns presort(const Dataset& data) {
  SortedColumns out;
  out.present.resize(data.n_features());
  out.missing.resize(data.n_features());
  for (std::size_t f = 0; f < data.n_features(); ++f) {
    const auto& col = data.column(f);
    for (std::uint32_t r = 0; r < col.size(); ++r) {
      (std::isnan(col[r]) ? out.missing[f] : out.present[f]).push_back(r);
    }
    std::stable_sort(out.present[f].begin(), out.present[f].end(),
                     [&](std::uint32_t a, std::uint32_t b) { return col[a] < col[b]; });
  }
  return out;
}

class TreeBuilder {
 public:
  TreeBuilder(const Dataset& data, const SortedColumns& sorted, const TrainConfig& config)
      : data_(data), sorted_(sorted), config_(config) {}

  /// Grows one tree on the gradient pairs; `leaf_of_row` receives each row's leaf id.
  Tree build(const std::vector<GradPair>& grad, int class_index, std::vector<int>& leaf_of_row) {
    const std::size_t n = grad.size();
    Tree tree;
    tree.class_index = class_index;
    tree.nodes.emplace_back();
    leaf_of_row.assign(n, 0);

    std::vector<int> frontier{0};
    for (int depth = 0; depth < config_.max_depth && !frontier.empty(); ++depth) {
      // Slot of each node within the frontier, -1 for nodes not being split.
      std::vector<int> slot(tree.nodes.size(), -1);
      for (std::size_t s = 0; s < frontier.size(); ++s) slot[frontier[s]] = static_cast<int>(s);

      std::vector<GradPair> total(frontier.size());
      std::vector<double> g_min(frontier.size(), std::numeric_limits<double>::infinity());
      std::vector<double> g_max(frontier.size(), -std::numeric_limits<double>::infinity());
      for (std::size_t r = 0; r < n; ++r) {
        const int s = slot[leaf_of_row[r]];
        if (s < 0) continue;
        total[s] += grad[r];
        g_min[s] = std::min(g_min[s], grad[r].g);
        g_max[s] = std::max(g_max[s], grad[r].g);
      }
      const std::vector<Split> best = find_splits(grad, leaf_of_row, slot, total);

      std::vector<int> next;
      for (std::size_t s = 0; s < frontier.size(); ++s) {
        // Zero-gain splits are kept while gradients still differ (XOR-like
        // structure only pays off one level down).
        if (best[s].feature < 0 || (best[s].gain <= 0.0 && !(g_max[s] > g_min[s]))) continue;
        const int id = frontier[s];
        const int left = static_cast<int>(tree.nodes.size());
        tree.nodes.emplace_back();
        tree.nodes.emplace_back();
        TreeNode& node = tree.nodes[id];
        node.is_leaf = false;
        node.feature = best[s].feature;
        node.threshold = best[s].threshold;
        node.missing = best[s].missing;
        node.left = left;
        node.right = left + 1;
        next.push_back(left);
        next.push_back(left + 1);
      }
      for (std::size_t r = 0; r < n; ++r) {
        const TreeNode& node = tree.nodes[leaf_of_row[r]];
        if (node.is_leaf) continue;
        const double v = data_.column(node.feature)[r];
        if (std::isnan(v)) {
          leaf_of_row[r] = node.missing == Branch::kLeft ? node.left : node.right;
        } else {
          leaf_of_row[r] = v < node.threshold ? node.left : node.right;
        }
      }
      frontier = std::move(next);
    }

    std::vector<GradPair> leaf_sum(tree.nodes.size());
    for (std::size_t r = 0; r < n; ++r) leaf_sum[leaf_of_row[r]] += grad[r];
    for (std::size_t id = 0; id < tree.nodes.size(); ++id) {
      TreeNode& node = tree.nodes[id];
      if (!node.is_leaf) continue;
      node.leaf_value = -config_.learning_rate * leaf_sum[id].g / (leaf_sum[id].h + config_.lambda_l2);
      node.cover = leaf_sum[id].h;
    }
    // Children always carry larger ids than their parent.
    for (std::size_t id = tree.nodes.size(); id-- > 0;) {
      TreeNode& node = tree.nodes[id];
      if (!node.is_leaf) node.cover = tree.nodes[node.left].cover + tree.nodes[node.right].cover;
    }
    return tree;
  }

 private:
  double score(const GradPair& p) const { return p.g * p.g / (p.h + config_.lambda_l2); }

  std::vector<Split> find_splits(const std::vector<GradPair>& grad, const std::vector<int>& leaf_of_row,
                                 const std::vector<int>& slot, const std::vector<GradPair>& total) const {
    const std::size_t m = total.size();
    std::vector<Split> best(m);
    std::vector<GradPair> missing(m), left(m);
    std::vector<double> prev(m);
    std::vector<bool> has_prev(m);

    for (std::size_t f = 0; f < data_.n_features(); ++f) {
      const auto& col = data_.column(f);
      std::fill(missing.begin(), missing.end(), GradPair{});
      std::fill(left.begin(), left.end(), GradPair{});
      std::fill(has_prev.begin(), has_prev.end(), false);
      for (std::uint32_t r : sorted_.missing[f]) {
        const int s = slot[leaf_of_row[r]];
        if (s >= 0) missing[s] += grad[r];
      }
      for (std::uint32_t r : sorted_.present[f]) {
        const int s = slot[leaf_of_row[r]];
        if (s < 0) continue;
        const double v = col[r];
        if (has_prev[s] && v > prev[s]) {
          consider(best[s], total[s], missing[s], left[s], static_cast<int>(f), prev[s], v);
        }
        left[s] += grad[r];
        prev[s] = v;
        has_prev[s] = true;
      }
    }
    return best;
  }

  void consider(Split& best, const GradPair& total, const GradPair& missing, const GradPair& left,
                int feature, double below, double above) const {
    const GradPair present{total.g - missing.g, total.h - missing.h};
    const GradPair right{present.g - left.g, present.h - left.h};
    const double parent = score(total);
    double threshold = below + (above - below) / 2.0;
    if (!(threshold > below)) threshold = above;

    auto try_split = [&](const GradPair& l, const GradPair& r, Branch branch) {
      if (l.h < config_.min_child_weight || r.h < config_.min_child_weight) return;
      const double gain = 0.5 * (score(l) + score(r) - parent);
      if (gain >= 0.0 && (best.feature < 0 || gain > best.gain)) best = {gain, feature, threshold, branch};
    };
    try_split(left, GradPair{right.g + missing.g, right.h + missing.h}, Branch::kRight);
    try_split(GradPair{left.g + missing.g, left.h + missing.h}, right, Branch::kLeft);
  }

  const Dataset& data_;
  const SortedColumns& sorted_;
  const TrainConfig& config_;
};

double sigmoid(double eta) {
  if (eta >= 0.0) return 1.0 / (1.0 + std::exp(-eta));
  const double e = std::exp(eta);
  return e / (1.0 + e);
}

void softmax(std::vector<double>& v) {
  const double top = *std::max_element(v.begin(), v.end());
  double sum = 0.0;
  for (double& x : v) {
    x = std::exp(x - top);
    sum += x;
  }
  for (double& x : v) x /= sum;
}

double clip(double p) { return std::clamp(p, kProbClip, 1.0 - kProbClip); }

void validate_config(const TrainConfig& c) {
  if (c.n_rounds < 1) throw ArgumentError("n_rounds must be >= 1");
  if (c.max_depth < 1 || c.max_depth > 12) throw ArgumentError("max_depth must be in [1, 12]");
  if (!(c.learning_rate > 0.0 && c.learning_rate <= 1.0)) {
    throw ArgumentError("learning_rate must be in (0, 1]");
  }
  if (!(c.min_child_weight >= 0.0)) throw ArgumentError("min_child_weight must be nonnegative");
  if (!(c.lambda_l2 >= 0.0)) throw ArgumentError("lambda_l2 must be nonnegative");
}

// Number of classes implied by a 0..K-1 encoded classification target.
int class_count(const std::vector<double>& y, Objective objective) {
  int max_label = 0;
  for (double v : y) {
    if (v < 0.0 || std::floor(v) != v) {
      throw ArgumentError("classification target must hold integer labels 0..K-1, found " +
                          format_double(v));
    }
    max_label = std::max(max_label, static_cast<int>(v));
  }
  if (objective == Objective::kBinaryLogistic && max_label > 1) {
    throw ArgumentError("binary_logistic target must be 0/1");
  }
  const double first = y.front();
  if (std::all_of(y.begin(), y.end(), [&](double v) { return v == first; })) {
    throw StatsError("degenerate target: single class");
  }
  return max_label + 1;
}

std::vector<double> initial_scores(const std::vector<double>& y, Objective objective, int k) {
  const double n = static_cast<double>(y.size());
  if (objective == Objective::kRegression) {
    return {std::accumulate(y.begin(), y.end(), 0.0) / n};
  }
  if (objective == Objective::kBinaryLogistic) {
    const double p = clip(std::accumulate(y.begin(), y.end(), 0.0) / n);
    return {std::log(p / (1.0 - p))};
  }
  std::vector<double> counts(k, 0.0);
  for (double v : y) counts[static_cast<int>(v)] += 1.0;
  std::vector<double> out(k);
  for (int c = 0; c < k; ++c) out[c] = std::log(clip(counts[c] / n));
  return out;
}

double training_loss(const std::vector<double>& y, const std::vector<std::vector<double>>& margin,
                     Objective objective) {
  const std::size_t n = y.size();
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (objective == Objective::kRegression) {
      const double d = margin[i][0] - y[i];
      total += d * d;
    } else if (objective == Objective::kBinaryLogistic) {
      const double p = clip(sigmoid(margin[i][0]));
      total -= y[i] * std::log(p) + (1.0 - y[i]) * std::log(1.0 - p);
    } else {
      std::vector<double> p = margin[i];
      softmax(p);
      total -= std::log(clip(p[static_cast<int>(y[i])]));
    }
  }
  total /= static_cast<double>(n);
  return objective == Objective::kRegression ? std::sqrt(total) : total;
}

std::vector<int> binary_labels(const std::vector<double>& y) {
  std::vector<int> out(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (y[i] != 0.0 && y[i] != 1.0) throw ArgumentError("binary metric needs a 0/1 target");
    out[i] = static_cast<int>(y[i]);
  }
  return out;
}

}  // namespace

TrainOutcome train_gbdt_traced(const Dataset& train, const TrainConfig& config) {
  validate_config(config);
  if (train.n_features() == 0) throw ArgumentError("empty feature set");
  if (train.n_rows() < 2) throw ArgumentError("training needs at least 2 rows");
  const auto& y = train.target();
  const int k = config.objective == Objective::kRegression ? 1 : class_count(y, config.objective);
  if (config.objective == Objective::kMulticlassSoftmax && k < 2) {
    throw StatsError("degenerate target: single class");
  }
  const int outputs = config.objective == Objective::kMulticlassSoftmax ? k : 1;
  const std::vector<double> base =
      initial_scores(y, config.objective, config.objective == Objective::kMulticlassSoftmax ? k : 1);

  const std::size_t n = train.n_rows();
  std::vector<std::vector<double>> margin(n, base);
  const SortedColumns sorted = presort(train);
  TreeBuilder builder(train, sorted, config);

  TrainOutcome outcome;
  outcome.loss_history.push_back(training_loss(y, margin, config.objective));
  std::vector<Tree> trees;
  std::vector<GradPair> grad(n);
  std::vector<int> leaf_of_row;
  std::vector<std::vector<double>> prob(n);

  for (int round = 0; round < config.n_rounds; ++round) {
    for (std::size_t i = 0; i < n; ++i) {
      prob[i] = margin[i];
      if (config.objective == Objective::kBinaryLogistic) prob[i][0] = sigmoid(margin[i][0]);
      if (config.objective == Objective::kMulticlassSoftmax) softmax(prob[i]);
    }
    for (int c = 0; c < outputs; ++c) {
      for (std::size_t i = 0; i < n; ++i) {
        switch (config.objective) {
          case Objective::kRegression:
            grad[i] = {margin[i][0] - y[i], 1.0};
            break;
          case Objective::kBinaryLogistic: {
            const double p = prob[i][0];
            grad[i] = {p - y[i], std::max(p * (1.0 - p), kMinHessian)};
            break;
          }
          case Objective::kMulticlassSoftmax: {
            const double p = prob[i][c];
            grad[i] = {p - (static_cast<int>(y[i]) == c ? 1.0 : 0.0),
                       std::max(p * (1.0 - p), kMinHessian)};
            break;
          }
        }
      }
      Tree tree = builder.build(grad, c, leaf_of_row);
      for (std::size_t i = 0; i < n; ++i) margin[i][c] += tree.nodes[leaf_of_row[i]].leaf_value;
      trees.push_back(std::move(tree));
    }
    outcome.loss_history.push_back(training_loss(y, margin, config.objective));
  }
  outcome.ensemble = TreeEnsemble(train.feature_names(), config.objective, base, std::move(trees));
  return outcome;
}

TreeEnsemble train_gbdt(const Dataset& train, const TrainConfig& config) {
  return train_gbdt_traced(train, config).ensemble;
}

TreeEnsemble constant_model(const Dataset& train, const TrainConfig& config) {
  const auto& y = train.target();
  if (y.empty()) throw ArgumentError("training needs at least one row");
  const int k = config.objective == Objective::kMulticlassSoftmax ? class_count(y, config.objective) : 1;
  if (config.objective == Objective::kBinaryLogistic) class_count(y, config.objective);
  return TreeEnsemble(train.feature_names(), config.objective, initial_scores(y, config.objective, k), {});
}

std::string_view to_string(Metric metric) {
  switch (metric) {
    case Metric::kAccuracy: return "accuracy";
    case Metric::kF1: return "f1";
    case Metric::kLogLoss: return "logloss";
    case Metric::kRmse: return "rmse";
  }
  return "rmse";
}

Metric metric_from_string(std::string_view name) {
  if (name == "accuracy") return Metric::kAccuracy;
  if (name == "f1") return Metric::kF1;
  if (name == "logloss") return Metric::kLogLoss;
  if (name == "rmse") return Metric::kRmse;
  throw ArgumentError("unknown metric \"" + std::string(name) + "\" (accuracy|f1|logloss|rmse)");
}

std::vector<std::vector<double>> predict_proba(const TreeEnsemble& ensemble, const Dataset& data) {
  const Dataset aligned = data.select(ensemble.feature_names());
  std::vector<std::vector<double>> out(aligned.n_rows());
  std::vector<double> row;
  for (std::size_t i = 0; i < aligned.n_rows(); ++i) {
    aligned.row(i, row);
    out[i] = ensemble.predict_margin(row);
    if (ensemble.objective() == Objective::kBinaryLogistic) out[i][0] = sigmoid(out[i][0]);
    if (ensemble.objective() == Objective::kMulticlassSoftmax) softmax(out[i]);
  }
  return out;
}

double evaluate(const TreeEnsemble& ensemble, const Dataset& data, Metric metric) {
  const Objective obj = ensemble.objective();
  const bool ok = (metric == Metric::kRmse && obj == Objective::kRegression) ||
                  (metric == Metric::kF1 && obj == Objective::kBinaryLogistic) ||
                  ((metric == Metric::kAccuracy || metric == Metric::kLogLoss) &&
                   obj != Objective::kRegression);
  if (!ok) {
    throw ArgumentError("metric " + std::string(to_string(metric)) + " does not apply to objective " +
                        std::string(to_string(obj)));
  }
  const auto proba = predict_proba(ensemble, data);
  const auto& y = data.target();

  if (obj == Objective::kRegression) {
    std::vector<double> pred(proba.size());
    for (std::size_t i = 0; i < proba.size(); ++i) pred[i] = proba[i][0];
    return rmse(y, pred);
  }
  if (obj == Objective::kBinaryLogistic) {
    const auto truth = binary_labels(y);
    std::vector<double> p(proba.size());
    std::vector<int> decision(proba.size());
    for (std::size_t i = 0; i < proba.size(); ++i) {
      p[i] = proba[i][0];
      decision[i] = p[i] >= 0.5 ? 1 : 0;
    }
    if (metric == Metric::kLogLoss) return binary_log_loss(y, p);
    return metric == Metric::kF1 ? f1_score(truth, decision) : accuracy_score(truth, decision);
  }

  const int k = ensemble.n_classes();
  std::vector<int> truth(y.size()), decision(y.size());
  double loss = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    if (y[i] < 0.0 || y[i] >= k || std::floor(y[i]) != y[i]) {
      throw ArgumentError("multiclass target must hold labels 0..K-1");
    }
    truth[i] = static_cast<int>(y[i]);
    decision[i] = static_cast<int>(std::max_element(proba[i].begin(), proba[i].end()) - proba[i].begin());
    loss -= std::log(clip(proba[i][truth[i]]));
  }
  if (metric == Metric::kLogLoss) return loss / static_cast<double>(y.size());
  return accuracy_score(truth, decision);
}

double accuracy_score(const std::vector<int>& truth, const std::vector<int>& predicted) {
  if (truth.size() != predicted.size() || truth.empty()) throw ArgumentError("accuracy: size mismatch");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) hits += truth[i] == predicted[i];
  return static_cast<double>(hits) / static_cast<double>(truth.size());
}

double f1_score(const std::vector<int>& truth, const std::vector<int>& predicted) {
  if (truth.size() != predicted.size() || truth.empty()) throw ArgumentError("f1: size mismatch");
  double tp = 0, fp = 0, fn = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (predicted[i] == 1 && truth[i] == 1) ++tp;
    if (predicted[i] == 1 && truth[i] != 1) ++fp;
    if (predicted[i] != 1 && truth[i] == 1) ++fn;
  }
  const double denom = 2 * tp + fp + fn;
  return denom == 0.0 ? 0.0 : 2 * tp / denom;
}

double binary_log_loss(const std::vector<double>& truth, const std::vector<double>& prob) {
  if (truth.size() != prob.size() || truth.empty()) throw ArgumentError("logloss: size mismatch");
  double total = 0.0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const double p = clip(prob[i]);
    total -= truth[i] * std::log(p) + (1.0 - truth[i]) * std::log(1.0 - p);
  }
  return total / static_cast<double>(truth.size());
}

double rmse(const std::vector<double>& truth, const std::vector<double>& predicted) {
  if (truth.size() != predicted.size() || truth.empty()) throw ArgumentError("rmse: size mismatch");
  double total = 0.0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const double d = truth[i] - predicted[i];
    total += d * d;
  }
  return std::sqrt(total / static_cast<double>(truth.size()));
}

}  // namespace shapsel
