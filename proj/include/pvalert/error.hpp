#pragma once

#include <stdexcept>
#include <string>

namespace pvalert {

// Error taxonomy. The CLI maps ConfigError to exit code 1 and InputError (and
// its subclasses) to exit code 2.

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Timestamps went backwards beyond what the consumer tolerates.
class OrderingError : public InputError {
 public:
  using InputError::InputError;
};

/// A probability model could not be built or evaluated (e.g. a covariance
/// that fails to factorize).
class ModelError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Bin index outside the model's support.
class IndexError : public std::out_of_range {
 public:
  using std::out_of_range::out_of_range;
};

}  // namespace pvalert
