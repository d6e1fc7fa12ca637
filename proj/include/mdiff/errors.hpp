#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace mdiff {

// Base of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Shape or extent mismatch between operands.
class DimensionError : public Error {
 public:
  using Error::Error;
};

// Invalid user-facing configuration (bad bounds, unknown names, empty sets).
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Violated precondition of an internal API.
class ContractError : public Error {
 public:
  using Error::Error;
};

// A NaN or Inf appeared where finite values are required.
class NumericError : public Error {
 public:
  using Error::Error;
};

// Malformed input file. `offset` is the byte position where parsing failed.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t offset)
      : Error(what + " (at byte " + std::to_string(offset) + ")"), offset_(offset) {}

  std::size_t offset() const noexcept { return offset_; }

 private:
  std::size_t offset_;
};

// Stored data failed a length or checksum verification.
class IntegrityError : public Error {
 public:
  using Error::Error;
};

// A metric was requested on inputs for which it is not defined (e.g. APD with N < 2).
class UndefinedMetricError : public Error {
 public:
  using Error::Error;
};

// Reverse process produced a non-finite state at diffusion step `step`.
class DivergedSamplingError : public Error {
 public:
  DivergedSamplingError(const std::string& what, int step)
      : Error(what + " (diffusion step " + std::to_string(step) + ")"), step_(step) {}

  int step() const noexcept { return step_; }

 private:
  int step_;
};

}  // namespace mdiff
