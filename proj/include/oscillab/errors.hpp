#pragma once

#include <stdexcept>

namespace oscillab {

// Invalid experiment or operation configuration (maps to exit code 2 in the CLI).
struct ConfigError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Non-finite values met during an iteration.
struct NumericalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Every start of an iterative norm estimator collapsed to the zero function.
struct DegenerateStartError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace oscillab
