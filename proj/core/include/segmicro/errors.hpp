#pragma once

#include <stdexcept>
#include <string>

namespace segmicro {

// Base class for everything thrown by this library.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// Tensor or layer shapes do not line up.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// A configuration value is out of range or malformed.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// File contents or external inputs are invalid.
class DataError : public Error {
 public:
  using Error::Error;
};

// An operation was called in the wrong order (e.g. backward before forward).
class StateError : public Error {
 public:
  using Error::Error;
};

// A value is outside the domain of the operation (e.g. unknown class id).
class DomainError : public Error {
 public:
  using Error::Error;
};

// A computation produced or received a non-finite value.
class NumericError : public Error {
 public:
  using Error::Error;
};

}  // namespace segmicro
