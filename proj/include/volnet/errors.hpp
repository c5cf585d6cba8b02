// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace volnet {

/// Root of every error the engine throws.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Tensor extents disagree with what an operation requires.
class ShapeError : public Error {
public:
    using Error::Error;
};

/// Shape product does not fit in addressable memory.
class SizeError : public Error {
public:
    using Error::Error;
};

/// Invalid argument value (not a shape problem).
class ArgumentError : public Error {
public:
    using Error::Error;
};

/// Architecture, optimizer or run configuration violates its invariants.
class ConfigError : public Error {
public:
    using Error::Error;
};

/// NaN/Inf where a finite number is required.
class NumericError : public Error {
public:
    using Error::Error;
};

/// Operation called in the wrong lifecycle state (e.g. backward before forward).
class StateError : public Error {
public:
    using Error::Error;
};

/// Malformed text input (CSV, JSON, PGM header); message carries the location.
class ParseError : public Error {
public:
    using Error::Error;
};

/// Volume/data preparation failures: inconsistent slices, crops that do not fit.
class DataError : public Error {
public:
    using Error::Error;
};

/// Statistics undefined for the given data (single-element batch, single-class labels).
class DegenerateError : public Error {
public:
    using Error::Error;
};

/// Prediction sets whose sample ids do not line up.
class AlignmentError : public Error {
public:
    using Error::Error;
};

}  // namespace volnet
