#pragma once

#include <stdexcept>
#include <string>

namespace amodrl {

/// Base class for all library errors.
struct Error : std::runtime_error {
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

/// Shape disagreement between operands.
struct DimensionError : Error {
  using Error::Error;
};

/// Invalid argument value (k = 0, tau <= 0, ...).
struct ArgumentError : Error {
  using Error::Error;
};

/// Input outside a function's domain (log of non-positive, lgamma(x<=0)).
struct DomainError : Error {
  using Error::Error;
};

/// Structurally degenerate input: fully-masked softmax row, zero degree.
struct DegenerateError : Error {
  using Error::Error;
};

/// Graph is not connected where connectivity is required.
struct ConnectivityError : Error {
  using Error::Error;
};

/// Malformed action (not a simplex vector).
struct ActionError : Error {
  using Error::Error;
};

/// Stepping an environment past its horizon.
struct EpisodeCompleteError : Error {
  using Error::Error;
};

/// NaN/Inf surfaced in a numeric computation, or an iteration failed to converge.
struct NumericError : Error {
  using Error::Error;
};

/// Bad configuration file or checkpoint/backbone mismatch.
struct ConfigError : Error {
  using Error::Error;
};

/// File could not be read/written or has a malformed container layout.
struct IoError : Error {
  using Error::Error;
};

/// A caller violated an API contract (non-scalar loss, ...).
struct ContractError : Error {
  using Error::Error;
};

}  // namespace amodrl
