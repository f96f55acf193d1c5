#pragma once

#include <stdexcept>
#include <string>

namespace tsopt {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Problems with inputs: bad dimensions, unknown ids, invalid configuration.
class ValidationError : public Error {
 public:
  using Error::Error;
};

class StructuralError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class ConfigError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class IoError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

// Failures of a numerical procedure on otherwise valid input.
class NumericalError : public Error {
 public:
  using Error::Error;
};

class InitializationError : public NumericalError {
 public:
  InitializationError(const std::string& what, double residual)
      : NumericalError(what), residual_(residual) {}
  double residual() const noexcept { return residual_; }

 private:
  double residual_;
};

class StepError : public NumericalError {
 public:
  StepError(const std::string& what, double time, int mode)
      : NumericalError(what + " (t=" + std::to_string(time) + ", mode=" + std::to_string(mode) + ")"),
        time_(time),
        mode_(mode) {}
  double time() const noexcept { return time_; }
  int mode() const noexcept { return mode_; }

 private:
  double time_;
  int mode_;
};

class JunctionError : public StepError {
 public:
  using StepError::StepError;
};

class PowerFlowError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class SensitivityError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class ObjectiveError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

}  // namespace tsopt
