#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace qpat {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A point lies outside the region where the operation is defined.
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Invalid argument value (count, tolerance, shape mismatch, ...).
class ArgumentError : public Error {
 public:
  using Error::Error;
};

/// A direction that should have unit length does not.
class NormalizationError : public ArgumentError {
 public:
  using ArgumentError::ArgumentError;
};

/// Evaluation point sits on a set where the kernel is infinite.
class SingularityError : public Error {
 public:
  using Error::Error;
};

class UnsupportedDimensionError : public ArgumentError {
 public:
  using ArgumentError::ArgumentError;
};

/// Measured data cannot come from any admissible medium.
class DataInconsistencyError : public Error {
 public:
  using Error::Error;
};

/// A measured ratio lies below the range of the map being inverted.
class OutOfRangeError : public Error {
 public:
  using Error::Error;
};

/// A measured ratio lies above the largest value the inversion can resolve.
class SaturationError : public Error {
 public:
  SaturationError(const std::string& what, double bracket_lo, double bracket_hi)
      : Error(what), lo_(bracket_lo), hi_(bracket_hi) {}
  double bracket_lo() const { return lo_; }
  double bracket_hi() const { return hi_; }

 private:
  double lo_;
  double hi_;
};

/// Iterative method did not reach its tolerance.
class ConvergenceError : public Error {
 public:
  ConvergenceError(const std::string& what, std::vector<double> history)
      : Error(what), history_(std::move(history)) {}
  const std::vector<double>& history() const { return history_; }

 private:
  std::vector<double> history_;
};

/// Required assumption of a check does not hold for the supplied inputs.
class PreconditionError : public Error {
 public:
  using Error::Error;
};

/// A model fit is ill-posed for the supplied samples.
class FitError : public Error {
 public:
  using Error::Error;
};

/// Malformed file content.
class FormatError : public Error {
 public:
  FormatError(const std::string& what, std::uint64_t byte_offset)
      : Error(what + " (at byte " + std::to_string(byte_offset) + ")"), offset_(byte_offset) {}
  std::uint64_t byte_offset() const { return offset_; }

 private:
  std::uint64_t offset_;
};

/// Configuration rejected by schema validation; one diagnostic per problem,
/// each prefixed with its line.
class ConfigError : public Error {
 public:
  explicit ConfigError(std::vector<std::string> diagnostics)
      : Error(join(diagnostics)), diagnostics_(std::move(diagnostics)) {}
  const std::vector<std::string>& diagnostics() const { return diagnostics_; }

 private:
  static std::string join(const std::vector<std::string>& d) {
    std::string s;
    for (const auto& line : d) s += (s.empty() ? "" : "\n") + line;
    return s;
  }
  std::vector<std::string> diagnostics_;
};

}  // namespace qpat
