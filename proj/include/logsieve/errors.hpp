#pragma once

#include <stdexcept>
#include <string>

namespace logsieve {

/// Base of every error the library throws on purpose.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed or unsupported query.
class QueryError : public Error {
 public:
  using Error::Error;
};

/// Bad input log rows or a rejected ingest batch.
class InputError : public Error {
 public:
  using Error::Error;
};

/// Store files missing, truncated or failing validation.
class CorruptionError : public Error {
 public:
  using Error::Error;
};

/// Configuration passed to open_or_create disagrees with the manifest.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Raised when another writer holds the store lock.
class LockError : public Error {
 public:
  using Error::Error;
};

/// Raised on contract violations detected at runtime.
class ContractError : public Error {
 public:
  using Error::Error;
};

}  // namespace logsieve
