#pragma once

#include <stdexcept>
#include <string>

namespace slicer {

// Error hierarchy. Every failure surfaced by the library derives from Error so
// callers can catch broadly at the CLI boundary and narrowly in tests.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad argument supplied by a caller (out-of-domain value, empty input).
class InputError : public Error {
 public:
  using Error::Error;
};

// Inconsistent or invalid configuration.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Malformed file contents. Carries the 1-based line number when known.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, int line)
      : Error(line > 0 ? "line " + std::to_string(line) + ": " + what : what), line_(line) {}
  int line() const { return line_; }

 private:
  int line_;
};

// A grid node could not be fitted (too few samples).
class FitError : public Error {
 public:
  using Error::Error;
};

// Environment used out of order (step after done, step before reset).
class LifecycleError : public Error {
 public:
  using Error::Error;
};

// Non-finite losses or advantages during training.
class TrainingError : public Error {
 public:
  using Error::Error;
};

// Operation not available for the given agent kind.
class UnsupportedAgentError : public Error {
 public:
  using Error::Error;
};

// File-system failures.
class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace slicer
