#pragma once

#include <stdexcept>
#include <string>

namespace cmit {

/// Base class for all errors raised by this library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid argument values (bad lengths, non-finite inputs, nonpositive truths, ...).
class ArgumentError : public Error {
 public:
  using Error::Error;
};

/// Invalid configuration (bad model sizes, overlapping split ranges, ...).
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Malformed input files; message carries the offending path/line.
class ParseError : public Error {
 public:
  using Error::Error;
};

/// Filesystem failures; message carries the path.
class IoError : public Error {
 public:
  using Error::Error;
};

/// Hard numeric failures (NaN/Inf where finiteness is an invariant).
class NumericError : public Error {
 public:
  using Error::Error;
};

}  // namespace cmit
