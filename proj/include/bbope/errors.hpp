#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace bbope {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A precondition on an argument was violated.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// An iterative solver hit its iteration cap before reaching tolerance.
class ConvergenceError : public Error {
 public:
  ConvergenceError(const std::string& what, std::size_t iterations, double residual)
      : Error(what + " (iterations=" + std::to_string(iterations) +
              ", residual=" + std::to_string(residual) + ")"),
        iterations_(iterations),
        residual_(residual) {}

  std::size_t iterations() const noexcept { return iterations_; }
  double residual() const noexcept { return residual_; }

 private:
  std::size_t iterations_;
  double residual_;
};

/// Training produced a non-finite loss or gradient.
class TrainingDiverged : public Error {
 public:
  explicit TrainingDiverged(std::size_t epoch)
      : Error("training diverged at epoch " + std::to_string(epoch)), epoch_(epoch) {}

  std::size_t epoch() const noexcept { return epoch_; }

 private:
  std::size_t epoch_;
};

/// A policy was queried on a state it does not cover.
class UndefinedPolicyState : public Error {
 public:
  explicit UndefinedPolicyState(const std::string& state)
      : Error("policy undefined at state " + state), state_(state) {}

  const std::string& state() const noexcept { return state_; }

 private:
  std::string state_;
};

}  // namespace bbope
