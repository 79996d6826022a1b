#pragma once

#include <stdexcept>
#include <string>

namespace p2pgrid {

// Base for every error raised by the library. Config problems map to exit code 2 in the CLI,
// everything else to exit code 1.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class CrossViolation : public Error {
 public:
  using Error::Error;
};

class EpisodeFinished : public Error {
 public:
  EpisodeFinished() : Error("episode already finished; call reset() first") {}
};

class IndexOutOfRange : public Error {
 public:
  using Error::Error;
};

class DataError : public Error {
 public:
  using Error::Error;
};

class EmptySeries : public DataError {
 public:
  using DataError::DataError;
};

class NonHourlyData : public DataError {
 public:
  using DataError::DataError;
};

class ShapeMismatch : public Error {
 public:
  using Error::Error;
};

class NonFiniteInput : public Error {
 public:
  using Error::Error;
};

class ChecksumMismatch : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

class UnknownFormat : public Error {
 public:
  using Error::Error;
};

}  // namespace p2pgrid
