#pragma once

#include <stdexcept>
#include <string>

namespace remul {

// Bad input: shapes, configs, malformed files. The CLI maps this to exit code 1.
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// NaN/Inf produced during a computation. Maps to exit code 2.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace remul
