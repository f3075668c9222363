#pragma once

#include <stdexcept>
#include <string>

namespace iqascore {

/// Base class for all errors raised by this library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Caller violated a precondition (bad arguments, illegal combination,
/// mismatched shapes). Maps to exit code 1 in the CLI.
class UsageError : public Error {
public:
    using Error::Error;
};

/// A document could not be parsed. Messages name the offending line.
class ParseError : public Error {
public:
    using Error::Error;
};

/// Parsed data violates a structural invariant (non-contiguous turn
/// indices, empty transcript, overlapping code sets).
class StructuralError : public Error {
public:
    using Error::Error;
};

/// Bad or missing configuration, including HTTP 4xx from a backend.
class ConfigError : public Error {
public:
    using Error::Error;
};

/// A backend request failed after exhausting retries. Maps to exit
/// code 2 in the CLI.
class BackendError : public Error {
public:
    using Error::Error;
};

/// Rejection sampling ran out of attempts for a required example class.
class SamplingError : public Error {
public:
    using Error::Error;
};

/// A metric is undefined for the given inputs.
class MetricError : public Error {
public:
    using Error::Error;
};

} // namespace iqascore
