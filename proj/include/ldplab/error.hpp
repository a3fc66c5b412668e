#pragma once

#include <stdexcept>
#include <string>

namespace ldplab {

// Base of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad input: out-of-range arguments, mismatched grids, malformed specs.
class DomainError : public Error {
 public:
  using Error::Error;
};

class InvalidGrid : public DomainError {
 public:
  using DomainError::DomainError;
};

// A coefficient violates one of the structural assumptions (symmetry, ellipticity).
class AssumptionViolation : public DomainError {
 public:
  using DomainError::DomainError;
};

class SingularKernel : public DomainError {
 public:
  using DomainError::DomainError;
};

class NotFound : public DomainError {
 public:
  using DomainError::DomainError;
};

// Invalid run configuration. `field` names the offending key.
class ConfigError : public Error {
 public:
  ConfigError(std::string field, const std::string& message)
      : Error(field.empty() ? message : field + ": " + message), field_(std::move(field)) {}
  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

// Failures of the numerics themselves; the CLI maps these to exit code 3.
class NumericalFailure : public Error {
 public:
  using Error::Error;
};

class BlowUp : public NumericalFailure {
 public:
  BlowUp(double time, double magnitude)
      : NumericalFailure("field blew up at t=" + std::to_string(time) + " (|u|=" +
                         std::to_string(magnitude) + ")"),
        time_(time),
        magnitude_(magnitude) {}
  double time() const noexcept { return time_; }
  double magnitude() const noexcept { return magnitude_; }

 private:
  double time_;
  double magnitude_;
};

class StepGuardViolation : public NumericalFailure {
 public:
  StepGuardViolation(double time, double ratio)
      : NumericalFailure("time step exceeds the flux step guard at t=" + std::to_string(time) +
                         " (ratio " + std::to_string(ratio) + ")"),
        time_(time),
        ratio_(ratio) {}
  double time() const noexcept { return time_; }
  double ratio() const noexcept { return ratio_; }

 private:
  double time_;
  double ratio_;
};

class ConvergenceError : public NumericalFailure {
 public:
  ConvergenceError(const std::string& what, int sweeps, double last_increment)
      : NumericalFailure(what), sweeps_(sweeps), last_increment_(last_increment) {}
  int sweeps() const noexcept { return sweeps_; }
  double last_increment() const noexcept { return last_increment_; }

 private:
  int sweeps_;
  double last_increment_;
};

class DegenerateEstimate : public NumericalFailure {
 public:
  using NumericalFailure::NumericalFailure;
};

class InsufficientData : public NumericalFailure {
 public:
  InsufficientData(const std::string& what, double eps) : NumericalFailure(what), eps_(eps) {}
  double eps() const noexcept { return eps_; }

 private:
  double eps_;
};

}  // namespace ldplab
