// Copyright (c) 2026 The tempo authors
// SPDX-License-Identifier: Apache-2.0
//
// Error taxonomy. Every failure mode raised by the library derives from
// tempo::Error so callers can catch broadly or by category.

#pragma once

#include <stdexcept>
#include <string>

namespace tempo {

struct Error : std::runtime_error {
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// Shape or rank mismatch between operands.
struct DimensionError : Error {
    using Error::Error;
};

// Invalid argument value (negative count, p >= 1, H % A != 0, ...).
struct ParamError : Error {
    using Error::Error;
};

// Operation attempted in the wrong phase (e.g. record after backward).
struct StateError : Error {
    using Error::Error;
};

// Missing or inconsistent setup (unverified table, unknown rule id, ...).
struct ConfigError : Error {
    using Error::Error;
};

// Referenced object no longer alive (recompute source freed too early).
struct LifecycleError : Error {
    using Error::Error;
};

// Input outside a function's mathematical domain.
struct DomainError : Error {
    using Error::Error;
};

// Malformed serialized input (table files, config files).
struct ParseError : Error {
    using Error::Error;
};

// Fit could not reach the requested tolerance within its budget.
struct FitError : Error {
    using Error::Error;
};

// Numeric invariant broken at runtime (NaN loss, non-finite output).
struct InvariantError : Error {
    using Error::Error;
};

}  // namespace tempo
