#pragma once

#include <stdexcept>
#include <string>

namespace aapl {

/// Base class for all library errors.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

/// Tensor shapes do not satisfy an operation's contract.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// A configuration value is invalid or inconsistent.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// A lookup key (class id, label, ...) is unknown or out of range.
class IndexError : public Error {
 public:
  using Error::Error;
};

/// A computation produced or encountered a non-finite value.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// An API precondition unrelated to shapes or configuration was violated.
class ContractError : public Error {
 public:
  using Error::Error;
};

/// Input is degenerate for the requested operation (zero norm, single cluster, ...).
class DegenerateInputError : public Error {
 public:
  using Error::Error;
};

/// Reading or writing a file failed.
class IoError : public Error {
 public:
  using Error::Error;
};

/// A persisted document has an unsupported schema version.
class VersionError : public Error {
 public:
  using Error::Error;
};

}  // namespace aapl
