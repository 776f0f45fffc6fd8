// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace doa {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Argument outside the mathematical domain of an operation.
struct DomainError : Error {
  using Error::Error;
};

/// Input that cannot be decoded, e.g. an all-zero predicted distribution.
struct DegenerateInputError : Error {
  using Error::Error;
};

/// A loss was paired with a label encoding whose components do not sum to 1.
struct IncompatibleEncodingError : Error {
  using Error::Error;
};

struct ConfigError : Error {
  using Error::Error;
};

struct IoError : Error {
  using Error::Error;
};

/// Raised by long-running loops when cancellation was requested.
struct Cancelled : Error {
  Cancelled() : Error("cancelled") {}
};

}  // namespace doa
