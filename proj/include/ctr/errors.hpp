#pragma once

#include <stdexcept>
#include <string>

namespace ctr {

// Base of every error raised by the library. Subclasses carry the condition
// name so callers (and the CLI) can report it without RTTI tricks.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidJoints : public Error {
 public:
  explicit InvalidJoints(const std::string& what) : Error("InvalidJoints: " + what) {}
};

class InvalidSystem : public Error {
 public:
  explicit InvalidSystem(const std::string& what) : Error("InvalidSystem: " + what) {}
};

class RetriesExhausted : public Error {
 public:
  explicit RetriesExhausted(const std::string& what) : Error("RetriesExhausted: " + what) {}
};

class ShootingNoConvergence : public Error {
 public:
  ShootingNoConvergence(const std::string& what, double residual)
      : Error("ShootingNoConvergence: " + what), residual_(residual) {}
  double residual() const noexcept { return residual_; }

 private:
  double residual_;
};

class EpisodeFinished : public Error {
 public:
  EpisodeFinished() : Error("EpisodeFinished: step() called after a terminal transition; call reset()") {}
};

class DimensionMismatch : public Error {
 public:
  explicit DimensionMismatch(const std::string& what) : Error("DimensionMismatch: " + what) {}
};

class TrainingDiverged : public Error {
 public:
  explicit TrainingDiverged(const std::string& what) : Error("TrainingDiverged: " + what) {}
};

class SingularUpdate : public Error {
 public:
  explicit SingularUpdate(const std::string& what) : Error("SingularUpdate: " + what) {}
};

class InvalidSpec : public Error {
 public:
  explicit InvalidSpec(const std::string& what) : Error("InvalidSpec: " + what) {}
};

class DegenerateFit : public Error {
 public:
  explicit DegenerateFit(const std::string& what) : Error("DegenerateFit: " + what) {}
};

class IncompatibleCheckpoint : public Error {
 public:
  explicit IncompatibleCheckpoint(const std::string& what) : Error("IncompatibleCheckpoint: " + what) {}
};

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what) : Error("ConfigError: " + what) {}
};

}  // namespace ctr
