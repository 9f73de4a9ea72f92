#pragma once

#include <stdexcept>
#include <string>

namespace specnhmc {

/// Base for every error thrown by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed input file (CSV row, JSON document).
class ParseError : public Error {
public:
    using Error::Error;
};

/// Input violates a type invariant (non-increasing grid, unknown class, ...).
class ValidationError : public Error {
public:
    using Error::Error;
};

/// Argument outside the mathematical domain of an operation.
class DomainError : public Error {
public:
    using Error::Error;
};

/// Array shapes do not agree.
class DimensionError : public Error {
public:
    using Error::Error;
};

/// Numerical breakdown, e.g. a likelihood that underflows to zero.
class NumericError : public Error {
public:
    using Error::Error;
};

/// Zero probability mass on the "large" states where a ratio over it is needed.
class DegenerateMassError : public Error {
public:
    using Error::Error;
};

/// Invalid benchmark configuration: unknown key, wrong type, bad value.
class ConfigError : public Error {
public:
    using Error::Error;
};

}  // namespace specnhmc
