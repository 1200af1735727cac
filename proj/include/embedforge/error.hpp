#pragma once

#include <stdexcept>
#include <string>

namespace embedforge {

// Base for every error the library raises. The CLI maps the subclasses to
// exit codes: ConfigError -> 2, DataError (and subclasses) -> 3,
// DivergenceError -> 4.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class DataError : public Error {
 public:
  using Error::Error;
};

// Labels do not form the batch layout an operation needs (ragged PK groups,
// too few identities, misaligned lists).
class StructureError : public DataError {
 public:
  using DataError::DataError;
};

class FormatError : public DataError {
 public:
  using DataError::DataError;
};

// Ratio-form loss with a zero denominator.
class DivisionError : public DataError {
 public:
  using DataError::DataError;
};

class DivergenceError : public Error {
 public:
  DivergenceError(const std::string& what, long iteration)
      : Error(what), iteration_(iteration) {}
  long iteration() const { return iteration_; }

 private:
  long iteration_;
};

}  // namespace embedforge
