#pragma once

#include <stdexcept>
#include <string>

namespace bertgram {

/// Base class for all errors raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Problems with input data: unreadable files, corrupt dumps, unknown tokens,
/// inputs that disagree on length or dimension.
class DataError : public Error {
 public:
  using Error::Error;
};

/// A binary file that does not match its documented layout.
class FormatError : public DataError {
 public:
  using DataError::DataError;
};

/// A parameter outside its documented range (K = 0, gamma <= 0, ...).
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

}  // namespace bertgram
