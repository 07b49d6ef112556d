#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace sarsim {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input text. `line()` is 1-based, 0 when not tied to a line.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line = 0)
      : Error(line ? what + " (line " + std::to_string(line) + ")" : what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

/// A query outside the valid region of a grid or domain, or over nodata.
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Invalid parameters or configuration.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// The potential solver did not reach its tolerance.
class ConvergenceError : public Error {
 public:
  ConvergenceError(const std::string& what, double residual) : Error(what), residual_(residual) {}
  double residual() const noexcept { return residual_; }

 private:
  double residual_;
};

/// No control sequence satisfies the MPC constraints.
class InfeasibleError : public Error {
 public:
  InfeasibleError(const std::string& what, std::string constraint)
      : Error(what), constraint_(std::move(constraint)) {}
  const std::string& constraint() const noexcept { return constraint_; }

 private:
  std::string constraint_;
};

}  // namespace sarsim
