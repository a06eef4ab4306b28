#pragma once

#include <stdexcept>
#include <string>

namespace socshape {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed scenario file or missing/inconsistent fields.
class InputError : public Error {
 public:
  using Error::Error;
};

/// A documented precondition of an operation was violated by the caller.
class PreconditionError : public Error {
 public:
  using Error::Error;
};

/// A factorization or iteration broke down numerically.
class NumericalError : public Error {
 public:
  using Error::Error;
};

}  // namespace socshape
