#pragma once

#include <stdexcept>
#include <string>

namespace uniprice {

/// Bad or missing configuration (CLI exit code 2).
class ConfigError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// A mapped column is absent or the input schema is otherwise unusable.
class SchemaError : public ConfigError {
  public:
    using ConfigError::ConfigError;
};

/// Unusable data content: empty datasets, bad files, contract violations
/// reachable from user input (CLI exit code 3).
class DataError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// Estimation failed: rank deficiency, singular calibration, degenerate
/// folds (CLI exit code 4).
class EstimationError : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

} // namespace uniprice
