// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The midibpe Authors

#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace midibpe {

// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed binary input (SMF or EMB1). Carries the byte offset at which
// decoding failed.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t offset)
      : Error(what + " (at byte offset " + std::to_string(offset) + ")"),
        offset_(offset) {}

  std::size_t offset() const noexcept { return offset_; }

 private:
  std::size_t offset_;
};

// A caller broke an operation's precondition (value out of range, score not
// preprocessed, unknown token id, ...).
class PreconditionError : public Error {
 public:
  using Error::Error;
};

// Input data that is well formed but cannot be processed (empty corpus,
// degenerate matrix, ...).
class DataError : public Error {
 public:
  using Error::Error;
};

}  // namespace midibpe
