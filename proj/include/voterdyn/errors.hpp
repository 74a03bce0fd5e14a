#pragma once

#include <stdexcept>
#include <string>

namespace voterdyn {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed pattern: self-loop, duplicate edge, index out of range, bad literal.
class PatternError : public Error {
 public:
  using Error::Error;
};

/// An exhaustive search or enumeration would exceed its fixed budget.
class SizeLimitError : public Error {
 public:
  using Error::Error;
};

/// Time, vertex label or type argument outside the admissible domain.
class RangeError : public Error {
 public:
  using Error::Error;
};

/// Numerical routine failed to reach its tolerance.
class NumericError : public Error {
 public:
  NumericError(const std::string& what, double achieved)
      : Error(what + " (achieved tolerance " + std::to_string(achieved) + ")"),
        achieved_(achieved) {}
  double achieved() const noexcept { return achieved_; }

 private:
  double achieved_;
};

/// Internal invariant broken; indicates a bug rather than bad input.
class ConsistencyError : public Error {
 public:
  using Error::Error;
};

/// Invalid experiment configuration. Carries the offending line when known.
class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what, int line = 0)
      : Error(line > 0 ? "line " + std::to_string(line) + ": " + what : what), line_(line) {}
  int line() const noexcept { return line_; }

 private:
  int line_;
};

/// Output file could not be created or written.
class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace voterdyn
