#pragma once

#include <stdexcept>
#include <string>

namespace screenaudit {

// Base class for all library failures. Every subclass carries a stable
// machine-readable code so callers (and the CLI) can map failures to
// structured error reports without parsing messages.
class Error : public std::runtime_error {
 public:
  Error(std::string code, const std::string& message)
      : std::runtime_error(message), code_(std::move(code)) {}
  const std::string& code() const { return code_; }

 private:
  std::string code_;
};

// Malformed value-level input: masses, weights, config fields out of range.
class ValidationError : public Error {
 public:
  explicit ValidationError(const std::string& m) : Error("validation", m) {}
};

// Structural mismatch between a schema and the data or artifact using it.
class SchemaError : public Error {
 public:
  explicit SchemaError(const std::string& m) : Error("schema_mismatch", m) {}
};

// An operation needs more rows / groups / members than were supplied.
class InsufficientDataError : public Error {
 public:
  explicit InsufficientDataError(const std::string& m)
      : Error("insufficient_data", m) {}
};

// Bad operation parameter (k out of range, degenerate weights, unknown name).
class ParameterError : public Error {
 public:
  explicit ParameterError(const std::string& m) : Error("parameter", m) {}
};

// A requested constraint cannot be satisfied (e.g. group quota exceeds the
// number of candidates available in that group).
class InfeasibleError : public Error {
 public:
  explicit InfeasibleError(const std::string& m) : Error("infeasible", m) {}
};

// Score evaluation produced a non-finite value; names the offending input.
class EvaluationError : public Error {
 public:
  explicit EvaluationError(const std::string& m) : Error("evaluation", m) {}
};

// Optimization failure. Carries the last finite loss seen so callers can
// report how far training got before diverging.
class TrainingError : public Error {
 public:
  TrainingError(const std::string& m, std::size_t iteration, double last_loss)
      : Error("training", m), iteration_(iteration), last_finite_loss_(last_loss) {}
  explicit TrainingError(const std::string& m)
      : Error("training", m), iteration_(0), last_finite_loss_(0.0) {}
  std::size_t iteration() const { return iteration_; }
  double last_finite_loss() const { return last_finite_loss_; }

 private:
  std::size_t iteration_;
  double last_finite_loss_;
};

// Filesystem / parse failures for files the toolkit reads or writes.
class IoError : public Error {
 public:
  explicit IoError(const std::string& m) : Error("io", m) {}
};

}  // namespace screenaudit
