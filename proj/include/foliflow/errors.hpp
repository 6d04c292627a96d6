#pragma once

#include <stdexcept>
#include <string>

namespace foliflow {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A stencil or query reached outside the sampled domain.
class DomainError : public Error {
public:
    using Error::Error;
};

/// Inconsistent numerical configuration (CFL violation, too few samples, ...).
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Polyline with fewer than three points or a zero-length segment.
class InvalidCurveError : public Error {
public:
    using Error::Error;
};

/// A flowing curve shrank below its resolvable length.
class ExtinctionError : public Error {
public:
    using Error::Error;
};

/// A non-finite value appeared during time stepping.
class NumericalAbort : public Error {
public:
    using Error::Error;
};

}  // namespace foliflow
