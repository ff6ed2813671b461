#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "shapsel/dataset.hpp"
#include "shapsel/regression.hpp"

namespace shapsel {

/// Benchmark task with five informative features x1..x5 and independent
/// standard-normal noise columns noise_01..noise_NN. The latent score is
///   z = 2*x1 + x2*x3 - x4 + 0.5*x5 + eps,   eps ~ N(0, noise_sd^2)
/// and the target is z (regression), 1[z > 0] (binary), or, for three classes,
/// argmax of (2*x1 - x4, x2*x3 + 0.5*x5, 0) each plus independent noise.
struct SyntheticSpec {
  TaskType task = TaskType::kRegression;
  std::size_t n_rows = 1000;
  std::size_t n_noise = 15;
  double noise_sd = 0.5;
  std::uint64_t seed = 0;
};

inline const std::array<std::string, 5> kInformativeFeatures{"x1", "x2", "x3", "x4", "x5"};
inline constexpr const char* kSyntheticTarget = "y";

Dataset make_synthetic(const SyntheticSpec& spec);

struct DataSplit {
  Dataset train;
  Dataset validation;
  Dataset test;
};

/// Shuffles rows with `seed` and cuts them by the given fractions (which must sum to 1).
DataSplit split_dataset(const Dataset& data, double train_fraction, double validation_fraction,
                        double test_fraction, std::uint64_t seed);

}  // namespace shapsel
