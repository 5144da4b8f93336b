#pragma once

#include <stdexcept>
#include <string>

namespace reluforge {

// Base for every error raised by the library. Callers that only care about
// "something in reluforge failed" can catch this one type.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ParseError : public Error {
 public:
  using Error::Error;
};

class DimensionError : public Error {
 public:
  using Error::Error;
};

class NonFiniteError : public Error {
 public:
  using Error::Error;
};

class NumericError : public Error {
 public:
  using Error::Error;
};

class LimitError : public Error {
 public:
  using Error::Error;
};

class InconsistentInputError : public Error {
 public:
  using Error::Error;
};

}  // namespace reluforge
