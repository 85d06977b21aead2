#pragma once

#include <stdexcept>
#include <string>

namespace clenet {

// Error taxonomy. The CLI maps these onto exit codes:
// config-type errors -> 2, data-type errors -> 3, divergence -> 4.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Bad configuration: invalid hyperparameters, regime/donor mismatch, etc.
struct ConfigError : Error {
  using Error::Error;
};

// Tensor/layer shape mismatch (treated as a configuration problem).
struct ShapeError : ConfigError {
  using ConfigError::ConfigError;
};

// Donor checkpoint does not cover the spec (missing or mis-shaped layers).
struct DonorMismatchError : ConfigError {
  using ConfigError::ConfigError;
};

// Out-of-bounds indexing.
struct IndexError : Error {
  using Error::Error;
};

// Bad input data: unreadable files, missing classes, misaligned ids.
struct DataError : Error {
  using Error::Error;
};

// Malformed file contents (bad magic, truncated payload, ...).
struct FormatError : DataError {
  using DataError::DataError;
};

// Non-finite loss or gradients during training.
struct DivergenceError : Error {
  DivergenceError(const std::string& layer, long long iteration)
      : Error("training diverged: non-finite gradient in '" + layer +
              "' at iteration " + std::to_string(iteration)),
        layer_name(layer),
        iteration(iteration) {}
  std::string layer_name;
  long long iteration;
};

}  // namespace clenet
