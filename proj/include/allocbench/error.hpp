#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace allocbench {

enum class ErrorKind {
  Parse,
  Validation,
  InsufficientData,
  Infeasible,
  Numerical,
  Convergence,
  NoTangency,
  UndefinedMetric,
  EpisodeEnded,
  TrainingDiverged,
  Io,
  Usage,
};

std::string_view to_string(ErrorKind kind) noexcept;

/// Single exception type for the library; callers branch on kind().
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

/// Raised when training produces a non-finite or exploding loss.
class TrainingDiverged : public Error {
 public:
  TrainingDiverged(const std::string& message, unsigned long long seed, long long step)
      : Error(ErrorKind::TrainingDiverged, message), seed_(seed), step_(step) {}

  unsigned long long seed() const noexcept { return seed_; }
  long long step() const noexcept { return step_; }

 private:
  unsigned long long seed_;
  long long step_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& message) {
  throw Error(kind, message);
}

inline void require(bool condition, ErrorKind kind, const std::string& message) {
  if (!condition) fail(kind, message);
}

}  // namespace allocbench
