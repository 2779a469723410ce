#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace rcg {

class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Shape or argument precondition violated.
class InvalidArgument : public Error {
public:
  using Error::Error;
};

/// Non-positive pivot during Cholesky factorization.
class FactorizationError : public Error {
public:
  FactorizationError(std::size_t pivot, double value)
      : Error("cholesky: non-positive pivot " + std::to_string(value) + " at index " +
              std::to_string(pivot)),
        pivot_(pivot) {}
  std::size_t pivot() const { return pivot_; }

private:
  std::size_t pivot_;
};

/// Zero or negative diagonal in a triangular factor.
class SingularMatrix : public Error {
public:
  using Error::Error;
};

/// A loss or gradient became NaN/Inf.
class NonFiniteError : public Error {
public:
  using Error::Error;
};

/// Bad config file, unknown key, or unreadable path.
class ConfigError : public Error {
public:
  using Error::Error;
};

}  // namespace rcg
