// Copyright (c) 2026, The dlens Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace dlens {

/// Caller passed arguments that violate an operation's preconditions.
class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Input file is missing, unreadable or malformed, or a model archive does
/// not match its configuration.
class LoadError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Token sequence longer than the model's positional table.
class ContextOverflow : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Numerical procedure failed (non-convergence, separation, rank deficiency).
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Postcondition the library itself should have guaranteed was violated.
class InvariantViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// A driver had nothing to aggregate after skipping unusable items.
class EmptyResult : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace dlens
