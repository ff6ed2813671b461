#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <set>

#include <json.hpp>

#include "shapsel/error.hpp"
#include "shapsel/gbdt.hpp"
#include "shapsel/selection.hpp"
#include "shapsel/synthetic.hpp"
#include "support/oracles.hpp"

using namespace shapsel;

namespace {

ShapMatrix make_shap(const std::vector<std::string>& names,
                     const std::vector<std::vector<double>>& columns) {
  ShapMatrix s;
  s.feature_names = names;
  s.n_rows = columns.front().size();
  s.base_values = {0.0};
  s.values.resize(s.n_rows * names.size());
  for (std::size_t r = 0; r < s.n_rows; ++r) {
    for (std::size_t j = 0; j < names.size(); ++j) s.at(r, j, 0) = columns[j][r];
  }
  return s;
}

RegressionResult with_t(std::vector<double> t) {
  RegressionResult r;
  for (double v : t) {
    r.coefficients.push_back(v);  // same sign as t
    r.t_values.push_back(v);
    r.p_values.push_back(two_sided_p_value(v, std::numeric_limits<double>::infinity()));
    r.std_errors.push_back(1.0);
  }
  return r;
}

// Regression fixture: y = 2a + b - c + noise, d pure noise.
struct Fixture {
  ShapMatrix shap;
  std::vector<double> y;
};

Fixture regression_fixture(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n01;
  const std::size_t n = 200;
  std::vector<std::vector<double>> cols(4, std::vector<double>(n));
  std::vector<double> y(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (auto& c : cols) c[i] = n01(rng);
    y[i] = 2 * cols[0][i] + cols[1][i] - cols[2][i] + 0.5 * n01(rng);
  }
  return {make_shap({"a", "b", "c", "d"}, cols), y};
}

std::set<std::string> as_set(const std::vector<std::string>& v) { return {v.begin(), v.end()}; }

const TaskKind kRegressionTask{TaskType::kRegression, 1, {}};

}  // namespace

TEST_CASE("multiclass aggregation takes the largest t and applies Bonferroni") {
  const auto agg = aggregate_multiclass({with_t({-1.0}), with_t({2.5}), with_t({0.3})}, 3);
  REQUIRE(agg.size() == 1);
  CHECK(agg[0].t_max == 2.5);
  CHECK(agg[0].class_of_max_t == 1);
  CHECK(agg[0].sign == 1);
  const double p = testing::normal_two_sided(2.5);
  CHECK(p == doctest::Approx(0.012419).epsilon(1e-4));
  CHECK(std::abs(agg[0].p_raw - p) <= 1e-9);
  CHECK(std::abs(agg[0].p_adjusted - 3 * p) <= 1e-9);

  const auto capped = aggregate_multiclass({with_t({0.1}), with_t({0.2})}, 2);
  CHECK(capped[0].p_adjusted == 1.0);
}

TEST_CASE("all-negative or zeroed maxima are marked for discard") {
  const auto neg = aggregate_multiclass({with_t({-3.0, 0.0}), with_t({-0.5, 0.0}), with_t({-2.0, 0.0})}, 3);
  CHECK(neg[0].sign == -1);
  CHECK(neg[0].t_max == -0.5);
  CHECK(neg[0].p_adjusted == 1.0);
  CHECK(neg[1].sign == 0);
  CHECK(neg[1].p_adjusted == 1.0);
  CHECK_THROWS_AS(aggregate_multiclass({with_t({1.0})}, 1), ArgumentError);
  CHECK_THROWS_AS(aggregate_multiclass({with_t({1.0}), with_t({1.0, 2.0})}, 2), ArgumentError);
}

TEST_CASE("elimination trace is a permutation and removes weakest first") {
  const Fixture f = regression_fixture(1);
  int fits = 0;
  const auto records = eliminate(f.shap, f.y, kRegressionTask, 1e-6, &fits);
  CHECK(fits == 4);
  REQUIRE(records.size() == 4);
  std::set<std::string> names;
  for (std::size_t i = 0; i < records.size(); ++i) {
    names.insert(records[i].feature);
    CHECK(records[i].removal_rank == static_cast<int>(i) + 1);
  }
  CHECK(names == std::set<std::string>{"a", "b", "c", "d"});
  CHECK(records.back().feature == "a");
  CHECK(records.front().feature == "c");  // most negative t goes first
  CHECK(records.front().coefficient_sign == -1);
}

TEST_CASE("negative-sign features are never selected at any threshold") {
  const Fixture f = regression_fixture(2);
  const auto records = eliminate(f.shap, f.y, kRegressionTask, 1e-6);
  for (double t : {1e-12, 0.001, 0.05, 0.5, 1.0}) {
    const auto selected = select_features(records, t);
    CHECK(std::find(selected.begin(), selected.end(), "c") == selected.end());
  }
  CHECK(as_set(select_features(records, 0.05)) == std::set<std::string>{"a", "b"});
}

TEST_CASE("a perfect predictor is selected with t = +inf") {
  std::mt19937_64 rng(4);
  std::normal_distribution<double> n01;
  std::vector<std::vector<double>> cols(3, std::vector<double>(50));
  for (auto& c : cols) {
    for (auto& v : c) v = n01(rng);
  }
  const ShapMatrix shap = make_shap({"p", "q", "r"}, cols);
  const auto records = eliminate(shap, cols[1], kRegressionTask, 0.0);
  CHECK(records.back().feature == "q");
  CHECK(records.back().t_value == std::numeric_limits<double>::infinity());
  CHECK(select_features(records, 0.05) == std::vector<std::string>{"q"});
}

TEST_CASE("selection is monotone in the threshold") {
  const Fixture f = regression_fixture(3);
  const auto records = eliminate(f.shap, f.y, kRegressionTask, 1e-6);
  std::set<std::string> previous;
  for (double t : {0.001, 0.01, 0.05, 0.1, 0.5, 1.0}) {
    const auto current = as_set(select_features(records, t));
    CHECK(std::includes(current.begin(), current.end(), previous.begin(), previous.end()));
    previous = current;
  }
}

TEST_CASE("column order of the Shapley matrix does not matter") {
  const Fixture f = regression_fixture(5);
  const auto base = eliminate(f.shap, f.y, kRegressionTask, 1e-6);
  std::vector<std::vector<double>> cols;
  const std::vector<std::string> order{"d", "b", "a", "c"};
  for (const auto& name : order) {
    const auto it = std::find(f.shap.feature_names.begin(), f.shap.feature_names.end(), name);
    cols.push_back(f.shap.column(static_cast<std::size_t>(it - f.shap.feature_names.begin()), 0));
  }
  const auto permuted = eliminate(make_shap(order, cols), f.y, kRegressionTask, 1e-6);
  REQUIRE(permuted.size() == base.size());
  for (std::size_t i = 0; i < base.size(); ++i) {
    CHECK(permuted[i].feature == base[i].feature);
    CHECK(permuted[i].t_value == base[i].t_value);
  }
}

TEST_CASE("binary selection fits one regression per elimination step") {
  const Fixture f = regression_fixture(6);
  std::vector<double> labels(f.y.size());
  std::transform(f.y.begin(), f.y.end(), labels.begin(), [](double v) { return v > 0 ? 1.0 : 0.0; });
  int fits = 0;
  const auto records = eliminate(f.shap, labels, infer_task(labels), 1e-6, &fits);
  CHECK(fits == 4);
  CHECK(records.back().feature == "a");
  CHECK_FALSE(records.back().class_of_max_t.has_value());
}

TEST_CASE("end to end on a small trained model, with sweep nesting and JSON") {
  SyntheticSpec spec;
  spec.task = TaskType::kBinary;
  spec.n_rows = 1200;
  spec.n_noise = 4;
  spec.seed = 11;
  const DataSplit split = split_dataset(make_synthetic(spec), 0.6, 0.4, 0.0, 11);
  TrainConfig config;
  config.objective = Objective::kBinaryLogistic;
  config.n_rounds = 40;
  config.max_depth = 3;
  const TreeEnsemble model = train_gbdt(split.train, config);

  const SelectionReport report = shap_select(model, split.validation);
  CHECK(report.task.type == TaskType::kBinary);
  CHECK(report.records.size() == model.n_features());
  CHECK(report.n_fits == static_cast<int>(model.n_features()));
  CHECK(std::find(report.selected.begin(), report.selected.end(), "x1") != report.selected.end());

  const std::vector<double> thresholds{0.001, 0.01, 0.05, 0.1, 0.5, 1.0};
  const auto sweep = threshold_sweep(model, split.validation, thresholds);
  for (std::size_t i = 1; i < sweep.size(); ++i) {
    const auto small = as_set(sweep[i - 1].selected);
    const auto large = as_set(sweep[i].selected);
    CHECK(std::includes(large.begin(), large.end(), small.begin(), small.end()));
  }
  CHECK(as_set(sweep[2].selected) == as_set(report.selected));

  const auto doc = nlohmann::json::parse(report_to_json(report));
  CHECK(doc.at("task") == "binary");
  CHECK(doc.at("threshold") == 0.05);
  CHECK(doc.at("selected").size() == report.selected.size());
  CHECK(doc.at("records").size() == report.records.size());
  for (const auto& r : doc.at("records")) {
    for (const char* key : {"feature", "removal_rank", "t_value", "coefficient_sign", "p_adjusted",
                            "class_of_max_t"}) {
      CHECK(r.contains(key));
    }
  }
  CHECK(doc.at("config").at("l1_weight") == 1e-6);
  CHECK(doc.at("config").at("seed") == 0);
}

TEST_CASE("argument and sample-size errors") {
  SyntheticSpec spec;
  spec.n_rows = 300;
  spec.n_noise = 2;
  const Dataset data = make_synthetic(spec);
  TrainConfig config;
  config.n_rounds = 5;
  const TreeEnsemble model = train_gbdt(data, config);

  SelectOptions bad;
  bad.threshold = 0.0;
  CHECK_THROWS_AS(shap_select(model, data, bad), ArgumentError);
  bad.threshold = 1.5;
  CHECK_THROWS_AS(shap_select(model, data, bad), ArgumentError);
  CHECK_THROWS_AS(shap_select(model, data.take({0, 1, 2, 3, 4})), StatsError);
  SelectOptions wrong_task;
  wrong_task.task = TaskType::kBinary;
  CHECK_THROWS_AS(shap_select(model, data, wrong_task), ArgumentError);
}

TEST_CASE("synthetic regression task: selection matches the frozen golden set") {
  SyntheticSpec spec;
  spec.n_rows = 7000;
  spec.seed = 20240917;
  const DataSplit split = split_dataset(make_synthetic(spec), 5.0 / 7.0, 2.0 / 7.0, 0.0, spec.seed);
  REQUIRE(split.train.n_rows() == 5000);
  const TreeEnsemble model = train_gbdt(split.train, TrainConfig{});
  const SelectionReport report = shap_select(model, split.validation);

  std::ifstream in(std::string(SHAPSEL_SOURCE_DIR) + "/tests/golden/synthetic_regression_selected.txt");
  std::set<std::string> golden;
  for (std::string line; std::getline(in, line);) {
    if (!line.empty()) golden.insert(line);
  }
  REQUIRE(golden.size() == 5);
  const auto selected = as_set(report.selected);
  for (const auto& name : kInformativeFeatures) CHECK(selected.count(name) == 1);
  CHECK(selected == golden);
}
