#include "shapsel/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <random>

#include "shapsel/error.hpp"

namespace shapsel {

Dataset make_synthetic(const SyntheticSpec& spec) {
  if (spec.n_rows == 0) throw ArgumentError("synthetic data needs at least one row");
  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> normal(0.0, 1.0);

  std::vector<std::string> names(kInformativeFeatures.begin(), kInformativeFeatures.end());
  for (std::size_t j = 1; j <= spec.n_noise; ++j) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "noise_%02zu", j);
    names.emplace_back(buf);
  }
  std::vector<std::vector<double>> cols(names.size(), std::vector<double>(spec.n_rows));
  std::vector<double> y(spec.n_rows);

  for (std::size_t i = 0; i < spec.n_rows; ++i) {
    for (auto& col : cols) col[i] = normal(rng);
    const double x1 = cols[0][i], x2 = cols[1][i], x3 = cols[2][i], x4 = cols[3][i], x5 = cols[4][i];
    switch (spec.task) {
      case TaskType::kRegression:
        y[i] = 2.0 * x1 + x2 * x3 - x4 + 0.5 * x5 + spec.noise_sd * normal(rng);
        break;
      case TaskType::kBinary:
        y[i] = 2.0 * x1 + x2 * x3 - x4 + 0.5 * x5 + spec.noise_sd * normal(rng) > 0.0 ? 1.0 : 0.0;
        break;
      case TaskType::kMulticlass: {
        const double s0 = 2.0 * x1 - x4 + spec.noise_sd * normal(rng);
        const double s1 = x2 * x3 + 0.5 * x5 + spec.noise_sd * normal(rng);
        const double s2 = spec.noise_sd * normal(rng);
        y[i] = s0 >= s1 && s0 >= s2 ? 0.0 : (s1 >= s2 ? 1.0 : 2.0);
        break;
      }
    }
  }
  return Dataset(std::move(names), std::move(cols), std::move(y));
}

DataSplit split_dataset(const Dataset& data, double train_fraction, double validation_fraction,
                        double test_fraction, std::uint64_t seed) {
  const double sum = train_fraction + validation_fraction + test_fraction;
  if (train_fraction <= 0.0 || validation_fraction < 0.0 || test_fraction < 0.0 ||
      std::abs(sum - 1.0) > 1e-9) {
    throw ArgumentError("split fractions must be nonnegative and sum to 1");
  }
  const std::size_t n = data.n_rows();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(seed);
  // Fisher-Yates with explicit index draws keeps the permutation stable across stdlibs.
  for (std::size_t i = n; i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(rng() % i);
    std::swap(order[i - 1], order[j]);
  }
  const auto n_train = static_cast<std::size_t>(std::llround(train_fraction * n));
  const auto n_valid = std::min(n - n_train, static_cast<std::size_t>(std::llround(validation_fraction * n)));
  auto slice = [&](std::size_t begin, std::size_t end) {
    return data.take(std::vector<std::size_t>(order.begin() + begin, order.begin() + end));
  };
  return {slice(0, n_train), slice(n_train, n_train + n_valid), slice(n_train + n_valid, n)};
}

}  // namespace shapsel
