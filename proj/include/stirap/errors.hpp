#pragma once

#include <stdexcept>
#include <string>

namespace stirap {

// Malformed or inconsistent chain description (CLI exit code 2).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Integrator or eigensolver breakdown (CLI exit code 3).
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IntegrationError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class EigenSolverError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

// Adiabatic state tracking lost continuity at time `t`.
class TrackingError : public NumericalError {
 public:
  TrackingError(const std::string& what, double t) : NumericalError(what), time_(t) {}
  double time() const { return time_; }

 private:
  double time_;
};

class ClassificationError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

}  // namespace stirap
