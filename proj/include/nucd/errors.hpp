#pragma once

#include <limits>
#include <stdexcept>
#include <string>

namespace nucd {

/// Base class for every error raised by the library. Each error category maps
/// onto one CLI exit code.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
  virtual int exit_code() const noexcept = 0;
};

/// Invalid argument, precondition violation, or malformed config.
class ParameterError : public Error {
 public:
  using Error::Error;
  int exit_code() const noexcept override { return 2; }
};

enum class IoErrorKind {
  kNotFound,
  kUnsupportedFormat,
  kMultiChannel,
  kTruncated,
  kWrite,
  kMalformed,
};

class IoError : public Error {
 public:
  IoError(IoErrorKind kind, const std::string& what) : Error(what), kind_(kind) {}
  IoErrorKind kind() const noexcept { return kind_; }
  int exit_code() const noexcept override { return 3; }

 private:
  IoErrorKind kind_;
};

/// Numerical failure (rank-deficient normal equations, vanishing weights...).
/// Carries the condition estimate of the offending system when one exists.
class NumericalError : public Error {
 public:
  explicit NumericalError(const std::string& what,
                          double condition = std::numeric_limits<double>::quiet_NaN())
      : Error(what), condition_(condition) {}
  double condition_estimate() const noexcept { return condition_; }
  int exit_code() const noexcept override { return 4; }

 private:
  double condition_;
};

enum class DegenerateKind {
  kBackground,  // SCR ring with zero spread
  kFeature,     // zero-norm feature map or row
  kGain,        // SCR_in == 0, gain undefined
};

/// A metric is undefined on the given input.
class DegenerateError : public NumericalError {
 public:
  DegenerateError(DegenerateKind kind, const std::string& what)
      : NumericalError(what), kind_(kind) {}
  DegenerateKind kind() const noexcept { return kind_; }

 private:
  DegenerateKind kind_;
};

const char* to_string(IoErrorKind kind);

}  // namespace nucd
