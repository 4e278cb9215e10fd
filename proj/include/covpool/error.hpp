// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace covpool {

enum class ErrorKind {
  Validation,  // bad configuration / arguments
  Shape,       // dimension mismatch
  Domain,      // out-of-range value
  Solver,      // numerical iteration did not converge
  Parse,       // malformed file contents
  Io           // filesystem failure
};

class Error : public std::runtime_error {
public:
  Error(ErrorKind kind, std::string msg)
      : std::runtime_error(std::move(msg)), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

private:
  ErrorKind kind_;
};

class ShapeError : public Error {
public:
  explicit ShapeError(std::string msg) : Error(ErrorKind::Shape, std::move(msg)) {}
};

class DomainError : public Error {
public:
  explicit DomainError(std::string msg) : Error(ErrorKind::Domain, std::move(msg)) {}
};

/// Thrown when an iterative solver exhausts its budget; carries the residual
/// it was still seeing so callers can report how far off convergence was.
class SolverError : public Error {
public:
  SolverError(std::string msg, double residual)
      : Error(ErrorKind::Solver, std::move(msg)), residual_(residual) {}
  double residual() const noexcept { return residual_; }

private:
  double residual_;
};

/// Malformed file contents; byte_offset points at the offending byte.
class ParseError : public Error {
public:
  ParseError(std::string msg, std::size_t byte_offset)
      : Error(ErrorKind::Parse, std::move(msg)), offset_(byte_offset) {}
  std::size_t byte_offset() const noexcept { return offset_; }

private:
  std::size_t offset_;
};

class IoError : public Error {
public:
  explicit IoError(std::string msg) : Error(ErrorKind::Io, std::move(msg)) {}
};

/// Aggregated configuration problems, reported field by field.
class ValidationError : public Error {
public:
  explicit ValidationError(std::vector<std::string> problems)
      : Error(ErrorKind::Validation, join(problems)), problems_(std::move(problems)) {}
  const std::vector<std::string>& problems() const noexcept { return problems_; }

private:
  static std::string join(const std::vector<std::string>& ps) {
    std::string out = "invalid configuration:";
    for (const auto& p : ps) {
      out += "\n  - ";
      out += p;
    }
    return out;
  }
  std::vector<std::string> problems_;
};

}  // namespace covpool
