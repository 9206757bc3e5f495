#pragma once

#include <stdexcept>
#include <string>

namespace unier {

// Base of every error the library throws on purpose.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A precondition on an argument or configuration value was violated.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

// Input data (files, logs, ids) is malformed or inconsistent.
class DataError : public Error {
 public:
  using Error::Error;
};

// A numerical procedure produced a non-finite value, e.g. a diverging
// learning rate.
class NumericalError : public Error {
 public:
  using Error::Error;
};

}  // namespace unier
