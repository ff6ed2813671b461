#pragma once

#include <stdexcept>
#include <string>

namespace shapsel {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid caller-supplied arguments (bad flag value, unknown column, ...).
class ArgumentError : public Error {
 public:
  using Error::Error;
};

/// Malformed or inconsistent model document.
class ModelError : public Error {
 public:
  using Error::Error;
};

/// CSV / dataset ingestion failure.
class DataError : public Error {
 public:
  using Error::Error;
};

/// Statistical failure: degenerate target, too few rows, singular design.
class StatsError : public Error {
 public:
  using Error::Error;
};

}  // namespace shapsel
