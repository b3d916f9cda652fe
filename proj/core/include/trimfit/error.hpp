#pragma once

#include <stdexcept>
#include <string>

namespace trimfit {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input: shape mismatch, out-of-range parameter, non-finite data.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// The selected design X_S does not have full column rank.
class RankDeficient : public Error {
 public:
  using Error::Error;
};

/// Gradient iterations left the divergence guard.
class Diverged : public Error {
 public:
  using Error::Error;
};

/// An exhaustive computation would exceed its enumeration budget.
class BudgetExceeded : public Error {
 public:
  using Error::Error;
};

/// Reading or writing a file failed, or its contents did not parse.
class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace trimfit
