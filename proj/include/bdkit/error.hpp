#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace bdkit {

// Base of every error the toolkit raises. Callers that only care about
// "validation vs. everything else" can test for ValidationError.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad caller input: argument out of range, malformed config. The CLI maps
// these to exit code 2.
class ValidationError : public Error {
 public:
  using Error::Error;
};

class ArgumentError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class ConfigError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class IoError : public Error {
 public:
  using Error::Error;
};

class IntegrityError : public Error {
 public:
  using Error::Error;
};

class FormatError : public Error {
 public:
  using Error::Error;
};

class LexError : public Error {
 public:
  LexError(const std::string& what, std::size_t offset)
      : Error(what + " at byte " + std::to_string(offset)), offset_(offset) {}
  std::size_t offset() const noexcept { return offset_; }

 private:
  std::size_t offset_;
};

class CapacityError : public Error {
 public:
  CapacityError(const std::string& what, std::size_t eligible)
      : Error(what), eligible_(eligible) {}
  std::size_t eligible() const noexcept { return eligible_; }

 private:
  std::size_t eligible_;
};

class CoverageError : public Error {
 public:
  using Error::Error;
};

class DegenerateError : public Error {
 public:
  using Error::Error;
};

class TriggerServiceError : public Error {
 public:
  using Error::Error;
};

}  // namespace bdkit
