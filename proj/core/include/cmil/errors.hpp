#pragma once

#include <stdexcept>
#include <string>

namespace cmil {

/// Root of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Bad configuration values (layer sizes, learning rates, counts).
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Vector or matrix dimensions disagree.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// Argument outside the mathematical domain of an operation.
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Loss or gradient became non-finite during optimization.
class TrainingDiverged : public Error {
 public:
  TrainingDiverged(const std::string& stage, int epoch, const std::string& what)
      : Error("training diverged in " + stage + " at epoch " + std::to_string(epoch) + ": " + what),
        stage_(stage),
        epoch_(epoch) {}

  const std::string& stage() const noexcept { return stage_; }
  int epoch() const noexcept { return epoch_; }

 private:
  std::string stage_;
  int epoch_;
};

/// A component was used before it was fitted.
class NotFitted : public Error {
 public:
  using Error::Error;
};

class NotEnoughData : public Error {
 public:
  using Error::Error;
};

/// API misuse, e.g. a state-dependent copula queried without a state.
class UsageError : public Error {
 public:
  using Error::Error;
};

/// Simulator preconditions violated (e.g. follower ahead of leader).
class InvalidScenario : public Error {
 public:
  using Error::Error;
};

class RolloutDiverged : public Error {
 public:
  RolloutDiverged(int step, const std::string& what)
      : Error("rollout diverged at step " + std::to_string(step) + ": " + what), step_(step) {}

  int step() const noexcept { return step_; }

 private:
  int step_;
};

/// Malformed file contents or filesystem failure.
class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace cmil
