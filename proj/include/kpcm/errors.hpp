#pragma once

#include <optional>
#include <stdexcept>
#include <string>

namespace kpcm {

/// Base class for every failure raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidArgument : public Error {
 public:
  using Error::Error;
};

class SingularLinearSystem : public Error {
 public:
  using Error::Error;
};

class ConvergenceFailure : public Error {
 public:
  using Error::Error;
};

class RootsNotConverged : public Error {
 public:
  using Error::Error;
};

class BranchAmbiguity : public Error {
 public:
  using Error::Error;
};

class EvaluationAtPole : public Error {
 public:
  using Error::Error;
};

class NewtonDivergence : public Error {
 public:
  using Error::Error;
};

/// Raised by anything that touches the dynamics. Carries the flow time at
/// which the failure happened when it is known.
class DynamicsError : public Error {
 public:
  explicit DynamicsError(const std::string& what, std::optional<double> time = std::nullopt)
      : Error(what), time_(time) {}

  std::optional<double> time() const { return time_; }

 private:
  std::optional<double> time_;
};

class PoleCollision : public DynamicsError {
 public:
  using DynamicsError::DynamicsError;
};

class StepUnderflow : public DynamicsError {
 public:
  using DynamicsError::DynamicsError;
};

}  // namespace kpcm
