#pragma once

#include <stdexcept>
#include <string>

namespace tinv {

// Malformed or out-of-contract input: bad dimensions, bad files, bad flags.
class InputError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

// Input is structurally valid but admits no meaningful result
// (e.g. all points coincident).
class DegenerateInputError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

// An iterative solver exhausted its iteration cap.
class ConvergenceError : public std::runtime_error {
public:
  ConvergenceError(const std::string& what, double achieved_residual)
      : std::runtime_error(what), achieved_residual_(achieved_residual) {}

  double achieved_residual() const { return achieved_residual_; }

private:
  double achieved_residual_;
};

// Inconsistent configuration: mismatched layer widths, zero normalization
// constants, empty datasets.
class ConfigError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

}  // namespace tinv
