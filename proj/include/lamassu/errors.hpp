#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace lamassu {

/// Base class for all library errors.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

class InvalidArgument : public Error {
 public:
  explicit InvalidArgument(const std::string& what) : Error(what) {}
};

/// A metadata block failed GCM authentication or carries malformed fields.
class MetadataIntegrityError : public Error {
 public:
  explicit MetadataIntegrityError(const std::string& what) : Error(what) {}
};

/// A data block failed the rehash/key check; carries the logical block index.
class DataIntegrityError : public Error {
 public:
  DataIntegrityError(const std::string& what, std::uint64_t logical_block)
      : Error(what), logical_block(logical_block) {}
  std::uint64_t logical_block;
};

class NotFoundError : public Error {
 public:
  explicit NotFoundError(const std::string& what) : Error(what) {}
};

class AlreadyExistsError : public Error {
 public:
  explicit AlreadyExistsError(const std::string& what) : Error(what) {}
};

/// Wrong passphrase or tampered keystore file.
class AuthenticationError : public Error {
 public:
  explicit AuthenticationError(const std::string& what) : Error(what) {}
};

/// Raised by a block store whose fault-injection hook has tripped.
class CrashInjectedError : public Error {
 public:
  explicit CrashInjectedError(const std::string& what) : Error(what) {}
};

class FormatError : public Error {
 public:
  explicit FormatError(const std::string& what) : Error(what) {}
};

class IoError : public Error {
 public:
  explicit IoError(const std::string& what) : Error(what) {}
};

}  // namespace lamassu
