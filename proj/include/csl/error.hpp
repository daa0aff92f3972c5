#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace csl {

// Root of every error the library throws. The CLI maps subclasses onto exit
// codes (see cli.hpp).
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Tensor shapes do not fit the operation.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// A documented precondition was violated by the caller.
class ContractError : public Error {
 public:
  using Error::Error;
};

// Invalid model/loss/run configuration.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Malformed binary or JSON input. Carries the byte offset where parsing failed.
class FormatError : public Error {
 public:
  FormatError(const std::string& what, std::uint64_t offset)
      : Error(what + " (at byte " + std::to_string(offset) + ")"), offset_(offset) {}

  std::uint64_t offset() const { return offset_; }

 private:
  std::uint64_t offset_;
};

// Well-formed input whose content breaks a stored invariant (e.g. non-unit rows).
class IntegrityError : public Error {
 public:
  using Error::Error;
};

// Non-finite values during inference.
class NumericError : public Error {
 public:
  using Error::Error;
};

// Non-finite loss or gradient during training.
class TrainingError : public Error {
 public:
  TrainingError(const std::string& what, std::string parameter = {})
      : Error(what), parameter_(std::move(parameter)) {}

  const std::string& parameter() const { return parameter_; }

 private:
  std::string parameter_;
};

class LookupError : public Error {
 public:
  using Error::Error;
};

class SamplingError : public Error {
 public:
  using Error::Error;
};

// A metric is undefined for the given input (e.g. AP with no relevant items).
class MetricError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace csl
