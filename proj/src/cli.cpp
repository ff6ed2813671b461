#include "shapsel/cli.hpp"

#include <algorithm>
#include <charconv>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <thread>

#include <CLI11.hpp>

#include "shapsel/dataset.hpp"
#include "shapsel/error.hpp"
#include "shapsel/gbdt.hpp"
#include "shapsel/model.hpp"
#include "shapsel/selection.hpp"
#include "shapsel/synthetic.hpp"
#include "shapsel/treeshap.hpp"

namespace shapsel::cli {

namespace {

struct CommonArgs {
  std::string model_path;
  std::string data_path;
  std::string target;
  double threshold = 0.05;
  std::string task = "auto";
  double l1_weight = 1e-6;
  std::string output;
  std::int64_t seed = 0;
};

struct TrainArgs {
  int rounds = 100;
  int depth = 4;
  double learning_rate = 0.1;
  double lambda = 1.0;
  double min_child_weight = 1.0;
  std::string split;
};

struct SweepArgs {
  std::string thresholds = "0.001,0.01,0.05,0.1,0.5,1";
  std::string metric;
  std::string train_path;
};

struct SynthArgs {
  std::string task = "regression";
  std::size_t rows = 1000;
  std::size_t noise_features = 15;
  double noise_sd = 0.5;
};

std::optional<TaskType> parse_task(const std::string& name) {
  if (name == "auto") return std::nullopt;
  if (name == "regression") return TaskType::kRegression;
  if (name == "binary") return TaskType::kBinary;
  if (name == "multiclass") return TaskType::kMulticlass;
  throw ArgumentError("--task must be auto|regression|binary|multiclass");
}

void check_threshold(double threshold) {
  if (!(threshold > 0.0 && threshold <= 1.0)) throw ArgumentError("threshold must be in (0,1]");
}

void check_l1(double l1) {
  if (!(l1 >= 0.0)) throw ArgumentError("--l1-weight must be nonnegative");
}

std::vector<double> parse_number_list(const std::string& text, char sep, const char* what) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, sep)) {
    double v = 0.0;
    const char* b = item.data();
    const char* e = item.data() + item.size();
    while (b < e && *b == ' ') ++b;
    auto [ptr, ec] = std::from_chars(b, e, v);
    if (ec != std::errc() || ptr != e) {
      throw ArgumentError(std::string("cannot parse ") + what + " entry \"" + item + "\"");
    }
    out.push_back(v);
  }
  if (out.empty()) throw ArgumentError(std::string(what) + " list is empty");
  return out;
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path);
  out << text;
  if (!out) throw DataError("failed writing " + path);
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string quoted = "\"";
  for (char c : s) {
    if (c == '"') quoted += '"';
    quoted += c;
  }
  return quoted + "\"";
}

std::string fixed(double v, int precision) {
  std::ostringstream os;
  if (std::isinf(v)) {
    os << (v > 0 ? "+inf" : "-inf");
  } else {
    os << std::setprecision(precision) << v;
  }
  return os.str();
}

// Model-facing label encoding: classification targets become 0..K-1.
Dataset encode_target(const Dataset& data, const TaskKind& task) {
  if (task.type == TaskType::kRegression) return data;
  const auto classes = encode_classes(data.target(), task);
  std::vector<std::vector<double>> cols;
  for (std::size_t j = 0; j < data.n_features(); ++j) cols.push_back(data.column(j));
  return Dataset(data.feature_names(), std::move(cols),
                 std::vector<double>(classes.begin(), classes.end()));
}

Objective objective_for(const TaskKind& task) {
  switch (task.type) {
    case TaskType::kRegression: return Objective::kRegression;
    case TaskType::kBinary: return Objective::kBinaryLogistic;
    case TaskType::kMulticlass: return Objective::kMulticlassSoftmax;
  }
  return Objective::kRegression;
}

TrainConfig train_config(const TrainArgs& t, Objective objective, std::int64_t seed) {
  TrainConfig c;
  c.n_rounds = t.rounds;
  c.max_depth = t.depth;
  c.learning_rate = t.learning_rate;
  c.lambda_l2 = t.lambda;
  c.min_child_weight = t.min_child_weight;
  c.objective = objective;
  c.seed = seed;
  return c;
}

void add_train_flags(CLI::App* cmd, TrainArgs& t) {
  cmd->add_option("--rounds", t.rounds, "Boosting rounds");
  cmd->add_option("--depth", t.depth, "Maximum tree depth");
  cmd->add_option("--learning-rate", t.learning_rate, "Shrinkage per round");
  cmd->add_option("--lambda", t.lambda, "L2 regularization on leaf values");
  cmd->add_option("--min-child-weight", t.min_child_weight, "Minimum hessian mass per child");
}

int cmd_select(const CommonArgs& a, std::ostream& out) {
  check_threshold(a.threshold);
  check_l1(a.l1_weight);
  const auto task = parse_task(a.task);
  const unsigned threads = thread_count_from_env();
  const TreeEnsemble model = load_model(a.model_path);
  const Dataset data = read_csv(a.data_path, a.target);

  SelectOptions options;
  options.threshold = a.threshold;
  options.task = task;
  options.l1_weight = a.l1_weight;
  options.n_threads = threads;
  options.seed = a.seed;
  const SelectionReport report = shap_select(model, data, options);
  if (!a.output.empty()) write_text(a.output, report_to_json(report));

  out << "task: " << to_string(report.task.type);
  if (report.task.type == TaskType::kMulticlass) out << " (" << report.task.n_classes << " classes)";
  out << ", threshold: " << report.threshold << "\n";
  out << std::left << std::setw(24) << "feature" << std::right << std::setw(14) << "t"
      << std::setw(14) << "p_adjusted" << std::setw(6) << "sign" << std::setw(10) << "selected"
      << "\n";
  for (auto it = report.records.rbegin(); it != report.records.rend(); ++it) {
    const bool chosen =
        std::find(report.selected.begin(), report.selected.end(), it->feature) != report.selected.end();
    out << std::left << std::setw(24) << it->feature << std::right << std::setw(14)
        << fixed(it->t_value, 6) << std::setw(14) << fixed(it->p_adjusted, 6) << std::setw(6)
        << it->coefficient_sign << std::setw(10) << (chosen ? "yes" : "no") << "\n";
  }
  out << "selected " << report.selected.size() << " of " << report.records.size() << " features\n";
  return kOk;
}

int cmd_shap(const CommonArgs& a, std::ostream& out) {
  const unsigned threads = thread_count_from_env();
  const TreeEnsemble model = load_model(a.model_path);
  const Dataset data = read_csv(a.data_path, a.target);
  const ShapMatrix shap = tree_shap(model, data, threads);
  const Dataset aligned = data.select(model.feature_names());

  std::ostringstream csv;
  csv << "row_index,class";
  for (const auto& name : model.feature_names()) csv << ',' << csv_field(name);
  csv << ",base_value,margin_prediction\n";
  std::vector<double> row;
  for (std::size_t r = 0; r < shap.n_rows; ++r) {
    aligned.row(r, row);
    const auto margin = model.predict_margin(row);
    for (int k = 0; k < shap.n_classes; ++k) {
      csv << r << ',' << k;
      for (std::size_t i = 0; i < shap.n_features(); ++i) csv << ',' << format_double(shap.at(r, i, k));
      csv << ',' << format_double(shap.base_values[k]) << ',' << format_double(margin[k]) << '\n';
    }
  }
  if (a.output.empty()) {
    out << csv.str();
  } else {
    write_text(a.output, csv.str());
  }
  return kOk;
}

int cmd_train(const CommonArgs& a, const TrainArgs& t, std::ostream& out) {
  if (a.output.empty()) throw ArgumentError("--output is required for train");
  const auto requested = parse_task(a.task);
  Dataset data = read_csv(a.data_path, a.target);

  std::string stem = a.output;
  if (stem.size() > 5 && stem.ends_with(".json")) stem.resize(stem.size() - 5);
  if (!t.split.empty()) {
    const auto parts = parse_number_list(t.split, '/', "--split");
    if (parts.size() != 3) throw ArgumentError("--split must look like 0.6/0.2/0.2");
    const DataSplit split = split_dataset(data, parts[0], parts[1], parts[2],
                                          static_cast<std::uint64_t>(a.seed));
    write_csv(split.train, a.target, stem + ".train.csv");
    write_csv(split.validation, a.target, stem + ".valid.csv");
    write_csv(split.test, a.target, stem + ".test.csv");
    out << "wrote " << stem << ".{train,valid,test}.csv (" << split.train.n_rows() << "/"
        << split.validation.n_rows() << "/" << split.test.n_rows() << " rows)\n";
    data = split.train;
  }

  TaskKind task;
  if (requested == TaskType::kRegression) {
    task.type = TaskType::kRegression;
  } else {
    task = infer_task(data.target());
    if (requested && *requested != task.type) {
      throw ArgumentError("target is " + std::string(to_string(task.type)) + ", not " +
                          std::string(to_string(*requested)));
    }
  }
  const TrainConfig config = train_config(t, objective_for(task), a.seed);
  const TrainOutcome outcome = train_gbdt_traced(encode_target(data, task), config);
  save_model(outcome.ensemble, a.output);
  out << "trained " << outcome.ensemble.trees().size() << " trees ("
      << to_string(config.objective) << "), final training loss "
      << fixed(outcome.loss_history.back(), 6) << "\n";
  return kOk;
}

int cmd_sweep(const CommonArgs& a, const SweepArgs& s, const TrainArgs& t, std::ostream& out) {
  const auto thresholds = parse_number_list(s.thresholds, ',', "--thresholds");
  for (double v : thresholds) check_threshold(v);
  check_l1(a.l1_weight);
  const auto task = parse_task(a.task);
  std::optional<Metric> metric;
  if (!s.metric.empty()) metric = metric_from_string(s.metric);
  if (metric && s.train_path.empty()) throw ArgumentError("--metric needs --train to retrain on");

  const unsigned threads = thread_count_from_env();
  const TreeEnsemble model = load_model(a.model_path);
  const Dataset validation = read_csv(a.data_path, a.target);

  SelectOptions options;
  options.task = task;
  options.l1_weight = a.l1_weight;
  options.n_threads = threads;
  options.seed = a.seed;

  SubsetMetric hook;
  std::optional<Dataset> train;
  if (metric) {
    const Dataset raw = read_csv(s.train_path, a.target);
    const TaskKind kind = resolve_task(model, raw.target(), task);
    train = encode_target(raw, kind);
    const Dataset valid_encoded = encode_target(validation, kind);
    const TrainConfig config = train_config(t, model.objective(), a.seed);
    hook = [&, config, valid_encoded](const std::vector<std::string>& features) {
      const TreeEnsemble refit = features.empty() ? constant_model(train->select(features), config)
                                                  : train_gbdt(train->select(features), config);
      return evaluate(refit, valid_encoded, *metric);
    };
  }

  const auto points = threshold_sweep(model, validation, thresholds, options, hook);
  std::ostringstream csv;
  csv << "threshold,n_selected,metric\n";
  for (const auto& p : points) {
    csv << format_double(p.threshold) << ',' << p.selected.size() << ','
        << (p.metric ? format_double(*p.metric) : "") << '\n';
  }
  if (a.output.empty()) {
    out << csv.str();
  } else {
    write_text(a.output, csv.str());
  }
  return kOk;
}

int cmd_synth(const SynthArgs& s, const CommonArgs& a, std::ostream& out) {
  if (a.output.empty()) throw ArgumentError("--output is required for synth");
  SyntheticSpec spec;
  const auto task = parse_task(s.task);
  if (!task) throw ArgumentError("synth needs an explicit --task");
  spec.task = *task;
  spec.n_rows = s.rows;
  spec.n_noise = s.noise_features;
  spec.noise_sd = s.noise_sd;
  spec.seed = static_cast<std::uint64_t>(a.seed);
  write_csv(make_synthetic(spec), kSyntheticTarget, a.output);
  out << "wrote " << spec.n_rows << " rows to " << a.output << "\n";
  return kOk;
}

}  // namespace

unsigned thread_count_from_env() {
  const char* env = std::getenv("SHAPSEL_THREADS");
  if (env == nullptr || *env == '\0') return std::max(1u, std::thread::hardware_concurrency());
  unsigned value = 0;
  const char* end = env + std::char_traits<char>::length(env);
  auto [ptr, ec] = std::from_chars(env, end, value);
  if (ec != std::errc() || ptr != end || value == 0) {
    throw ArgumentError("SHAPSEL_THREADS must be a positive integer");
  }
  return value;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Feature selection for tree ensembles from Shapley-value regressions"};
  app.name("shapsel");
  app.require_subcommand(1);

  CommonArgs common;
  TrainArgs train_args;
  SweepArgs sweep_args;
  SynthArgs synth_args;

  auto add_common = [&](CLI::App* cmd, bool needs_model, bool needs_target) {
    if (needs_model) cmd->add_option("--model", common.model_path, "Model JSON")->required();
    cmd->add_option("--data", common.data_path, "CSV data file")->required();
    auto* target = cmd->add_option("--target", common.target, "Target column name");
    if (needs_target) target->required();
    cmd->add_option("--output", common.output, "Output path");
    cmd->add_option("--seed", common.seed, "Random seed");
    cmd->add_option("--task", common.task, "auto|regression|binary|multiclass");
  };

  auto* select = app.add_subcommand("select", "Select features by Shapley-value regression");
  add_common(select, true, true);
  select->add_option("--threshold", common.threshold, "Significance threshold in (0,1]");
  select->add_option("--l1-weight", common.l1_weight, "L1 penalty of the significance regressions");

  auto* shap = app.add_subcommand("shap", "Dump TreeSHAP values as CSV");
  add_common(shap, true, false);

  auto* train = app.add_subcommand("train", "Train the built-in GBDT and write model JSON");
  add_common(train, false, true);
  add_train_flags(train, train_args);
  train->add_option("--split", train_args.split, "Shuffle and split train/valid/test, e.g. 0.6/0.2/0.2");

  auto* sweep = app.add_subcommand("sweep", "Selected-feature counts across thresholds");
  add_common(sweep, true, true);
  sweep->add_option("--l1-weight", common.l1_weight, "L1 penalty of the significance regressions");
  sweep->add_option("--thresholds", sweep_args.thresholds, "Comma-separated thresholds");
  sweep->add_option("--metric", sweep_args.metric, "accuracy|f1|logloss|rmse after retraining");
  sweep->add_option("--train", sweep_args.train_path, "Training CSV used to retrain per threshold");
  add_train_flags(sweep, train_args);

  auto* synth = app.add_subcommand("synth", "Write the synthetic benchmark dataset as CSV");
  synth->add_option("--task", synth_args.task, "regression|binary|multiclass");
  synth->add_option("--rows", synth_args.rows, "Number of rows");
  synth->add_option("--noise-features", synth_args.noise_features, "Number of noise columns");
  synth->add_option("--noise-sd", synth_args.noise_sd, "Latent noise standard deviation");
  synth->add_option("--seed", common.seed, "Random seed");
  synth->add_option("--output", common.output, "Output CSV")->required();

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForAllHelp& e) {
    out << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kBadArguments;
  }

  try {
    if (select->parsed()) return cmd_select(common, out);
    if (shap->parsed()) return cmd_shap(common, out);
    if (train->parsed()) return cmd_train(common, train_args, out);
    if (sweep->parsed()) return cmd_sweep(common, sweep_args, train_args, out);
    if (synth->parsed()) return cmd_synth(synth_args, common, out);
  } catch (const ArgumentError& e) {
    err << "error: " << e.what() << "\n";
    return kBadArguments;
  } catch (const ModelError& e) {
    err << "error: " << e.what() << "\n";
    return kIoFailure;
  } catch (const DataError& e) {
    err << "error: " << e.what() << "\n";
    return kIoFailure;
  } catch (const StatsError& e) {
    err << "error: " << e.what() << "\n";
    return kStatsFailure;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kFailure;
  }
  return kBadArguments;
}

}  // namespace shapsel::cli
