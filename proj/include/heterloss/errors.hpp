#pragma once

#include <stdexcept>
#include <string>

namespace heterloss {

/// Base of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Matrix or parameter shapes disagree.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// Caller supplied bad data (non-finite values, empty sets, malformed files).
class InputError : public Error {
 public:
  using Error::Error;
};

/// Invalid configuration (layer sizes, hyperparameters, constant features).
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Argument outside the mathematical domain of a function.
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Object used in an inconsistent state (e.g. a forward cache from another network).
class StateError : public Error {
 public:
  using Error::Error;
};

/// Statistic undefined for the given data (zero variance).
class DegenerateError : public Error {
 public:
  using Error::Error;
};

}  // namespace heterloss
