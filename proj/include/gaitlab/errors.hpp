#pragma once

#include <stdexcept>
#include <string>

namespace gaitlab {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input document. `key()` names the offending field (may be empty).
class ParseError : public Error {
 public:
  ParseError(std::string key, const std::string& what)
      : Error(key.empty() ? what : key + ": " + what), key_(std::move(key)) {}
  const std::string& key() const { return key_; }

 private:
  std::string key_;
};

/// Input parsed but violates a documented invariant.
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// Caller broke a precondition (shape mismatch, non-finite input, ...).
class ContractError : public Error {
 public:
  using Error::Error;
};

/// Configuration is inconsistent (e.g. preset needs a gait library).
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// A file could not be read or written.
class IoError : public Error {
 public:
  using Error::Error;
};

/// A file was produced for a different robot model.
class IncompatibleModelError : public Error {
 public:
  using Error::Error;
};

}  // namespace gaitlab
