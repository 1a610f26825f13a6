#pragma once

#include <stdexcept>
#include <string>

namespace rgb2lidar {

/// Root of every error raised by the library. The CLI maps subclasses onto
/// exit codes, so new error kinds must derive from the right branch.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Configuration / caller mistakes (exit code 2).
class ConfigError : public Error {
 public:
  using Error::Error;
};

class ParameterError : public ConfigError {
 public:
  using ConfigError::ConfigError;
};

class CapacityError : public ParameterError {
 public:
  using ParameterError::ParameterError;
};

// Data problems (exit code 3).
class DataError : public Error {
 public:
  using Error::Error;
};

class FormatError : public DataError {
 public:
  using DataError::DataError;
};

class VersionError : public FormatError {
 public:
  using FormatError::FormatError;
};

class SchemaError : public DataError {
 public:
  using DataError::DataError;
};

class ShapeError : public DataError {
 public:
  using DataError::DataError;
};

class AmbiguityError : public DataError {
 public:
  using DataError::DataError;
};

class InsufficientDataError : public DataError {
 public:
  using DataError::DataError;
};

class DegenerateVectorError : public DataError {
 public:
  using DataError::DataError;
};

class AlignmentError : public DataError {
 public:
  using DataError::DataError;
};

class NoGroundError : public DataError {
 public:
  using DataError::DataError;
};

// Optimisation blew up (exit code 4).
class TrainingError : public Error {
 public:
  TrainingError(const std::string& what, std::size_t epoch)
      : Error(what + " (epoch " + std::to_string(epoch) + ")"), epoch_(epoch) {}

  std::size_t epoch() const noexcept { return epoch_; }

 private:
  std::size_t epoch_;
};

}  // namespace rgb2lidar
