#pragma once

#include <stdexcept>
#include <string>

namespace tlnet {

// Every failure raised by the library derives from Error so callers can
// catch one type; the subclasses let the CLI map failures to exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Incompatible tensor shapes or lengths.
class DimensionError : public Error {
 public:
  using Error::Error;
};

// Bad argument values: non-binary masks, even kernels, empty ranges, bad configs.
class ValidationError : public Error {
 public:
  using Error::Error;
};

// Non-finite values or iterative solvers that fail to converge.
class NumericError : public Error {
 public:
  using Error::Error;
};

// Misuse of a stateful object, e.g. running backward twice on one tape.
class StateError : public Error {
 public:
  using Error::Error;
};

// File system and parse failures.
class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace tlnet
