#pragma once

#include <stdexcept>
#include <string>

namespace stdagcn {

// Base for every error raised by the library. Subclasses name the category
// so the CLI can map them to exit codes and messages.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Tensor or matrix dimensions do not agree.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// Invalid hyperparameter or option value.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Input data violates a precondition (non-finite values, inconsistent cohort).
class DataError : public Error {
 public:
  using Error::Error;
};

// Malformed text input; message carries row/column when known.
class ParseError : public Error {
 public:
  using Error::Error;
};

// API misuse by the caller (empty inputs, mismatched lengths).
class UsageError : public Error {
 public:
  using Error::Error;
};

// Violated internal contract (e.g. backward on a non-scalar).
class ContractError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

// Optimization produced a non-finite loss.
class DivergenceError : public Error {
 public:
  using Error::Error;
};

}  // namespace stdagcn
