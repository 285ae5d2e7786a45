#pragma once

#include <stdexcept>
#include <string>

namespace more {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Array shapes disagree with the model or with each other.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// A value violates a documented precondition (non-finite data, bad config, ...).
class ValidationError : public Error {
 public:
  using Error::Error;
};

class IndexError : public Error {
 public:
  using Error::Error;
};

/// A linear system could not be solved stably.
class IllConditionedError : public Error {
 public:
  using Error::Error;
};

/// A file could not be read or did not match its format.
class LoadError : public Error {
 public:
  using Error::Error;
};

}  // namespace more
