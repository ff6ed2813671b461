#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "shapsel/error.hpp"

namespace shapsel {

/// Column-major table of real features (NaN = missing) plus a target column.
class Dataset {
 public:
  Dataset() = default;
  /// Throws DataError if columns are ragged, names repeat, or the target has NaN.
  Dataset(std::vector<std::string> feature_names, std::vector<std::vector<double>> columns,
          std::vector<double> target);

  std::size_t n_rows() const { return target_.size(); }
  std::size_t n_features() const { return names_.size(); }
  const std::vector<std::string>& feature_names() const { return names_; }
  const std::vector<double>& column(std::size_t j) const { return columns_[j]; }
  const std::vector<double>& target() const { return target_; }

  std::optional<std::size_t> index_of(const std::string& name) const;

  /// Copy of the table restricted to (and ordered by) `names`.
  /// Throws ArgumentError naming the first absent column.
  Dataset select(const std::vector<std::string>& names) const;

  /// The listed rows, in the given order.
  Dataset take(const std::vector<std::size_t>& rows) const;

  /// Row `i` laid out in feature order.
  void row(std::size_t i, std::vector<double>& out) const;

 private:
  std::vector<std::string> names_;
  std::vector<std::vector<double>> columns_;
  std::vector<double> target_;
};

/// Raised when the requested target column is absent from the CSV header.
class MissingColumnError : public ArgumentError {
 public:
  using ArgumentError::ArgumentError;
};

/// Reads a comma-separated file with a mandatory header row. Empty cells and
/// the literal `NaN` denote missing feature values; the target must be complete.
/// An empty `target_column` reads every column as a feature (target all zero).
Dataset read_csv(const std::string& path, const std::string& target_column);
Dataset parse_csv(const std::string& text, const std::string& target_column);

/// Writes features followed by the target column named `target_column`.
void write_csv(const Dataset& data, const std::string& target_column, const std::string& path);

/// `%.17g` rendering; round-trips every finite double exactly.
std::string format_double(double value);

}  // namespace shapsel
