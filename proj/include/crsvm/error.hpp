#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace crsvm {

// Every error carries a short machine-readable class name so the CLI can
// report failures as a single parsable line.
class Error : public std::runtime_error {
 public:
  Error(std::string kind, const std::string& what)
      : std::runtime_error(what), kind_(std::move(kind)) {}

  const std::string& kind() const noexcept { return kind_; }

 private:
  std::string kind_;
};

class InvalidArgument : public Error {
 public:
  explicit InvalidArgument(const std::string& what)
      : Error("invalid_argument", what) {}
};

class ShapeError : public Error {
 public:
  explicit ShapeError(const std::string& what) : Error("shape_error", what) {}
};

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what) : Error("config_error", what) {}
};

class IoError : public Error {
 public:
  explicit IoError(const std::string& what) : Error("io_error", what) {}
};

class ParseError : public Error {
 public:
  explicit ParseError(const std::string& what) : Error("parse_error", what) {}
};

class ProtocolError : public Error {
 public:
  explicit ProtocolError(const std::string& what)
      : Error("protocol_error", what) {}
};

class UnsupportedError : public Error {
 public:
  explicit UnsupportedError(const std::string& what)
      : Error("unsupported", what) {}
};

/// Thrown by iterative linear solvers that hit their iteration cap.
class SolverFailure : public Error {
 public:
  SolverFailure(const std::string& what, double residual_norm)
      : Error("solver_failure", what), residual_norm_(residual_norm) {}

  double residual_norm() const noexcept { return residual_norm_; }

 private:
  double residual_norm_;
};

/// Non-finite iterate detected during ADMM.
class DivergenceError : public Error {
 public:
  DivergenceError(const std::string& what, std::size_t iteration)
      : Error("divergence", what), iteration_(iteration) {}

  std::size_t iteration() const noexcept { return iteration_; }

 private:
  std::size_t iteration_;
};

}  // namespace crsvm
