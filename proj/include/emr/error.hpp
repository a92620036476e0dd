#pragma once

#include <stdexcept>
#include <string>

namespace emr {

// Bad input, bad shapes, bad configuration. The CLI maps this to exit code 2.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Solver failure, blow-up, non-convergence. The CLI maps this to exit code 3.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace emr
