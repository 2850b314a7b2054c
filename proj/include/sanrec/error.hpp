// Copyright 2026 The sanrec Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace sanrec {

/// Base class of every error the library throws. The CLI maps each subclass
/// to a process exit status.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid configuration: bad dimensions, infeasible layer plans.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Bad user input: empty sequences, out-of-range ids, missing paths.
class InputError : public Error {
 public:
  using Error::Error;
};

/// Tensor shapes that do not agree for the requested operation.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// A caller broke a precondition (non-scalar loss, NaN logits, ...).
class ContractError : public Error {
 public:
  using Error::Error;
};

/// Arithmetic domain violation (log of a zero probability).
class DomainError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

/// Malformed binary file. Carries the byte offset where parsing failed.
class FormatError : public Error {
 public:
  FormatError(const std::string& what, std::uint64_t offset)
      : Error(what + " (at byte offset " + std::to_string(offset) + ")"),
        offset_(offset) {}
  std::uint64_t offset() const noexcept { return offset_; }

 private:
  std::uint64_t offset_;
};

class VersionError : public FormatError {
 public:
  using FormatError::FormatError;
};

class NotFoundError : public Error {
 public:
  using Error::Error;
};

/// Cached artifact was produced by a different encoder or config.
class StalenessError : public Error {
 public:
  using Error::Error;
};

}  // namespace sanrec
