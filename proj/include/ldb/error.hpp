#pragma once

#include <stdexcept>
#include <string>

namespace ldb {

/// Base class for all errors raised by the library.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

/// Tensor shape mismatch; message names the offending shapes.
class ShapeError : public Error {
public:
    using Error::Error;
};

/// Invalid configuration value; message names the field.
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Dataset content problem (label out of range, count mismatch, ...).
class DataError : public Error {
public:
    using Error::Error;
};

/// Malformed file; message carries the byte offset where parsing failed.
class FormatError : public Error {
public:
    using Error::Error;
};

/// Filesystem failure; message carries the path.
class IoError : public Error {
public:
    using Error::Error;
};

/// Training produced a non-finite loss.
class DivergedError : public Error {
public:
    DivergedError(const std::string& msg, int epoch, int step)
        : Error(msg), epoch(epoch), step(step) {}
    int epoch;
    int step;
};

/// Monotonic clock misbehaved during a measurement.
class MeasurementError : public Error {
public:
    using Error::Error;
};

/// Internal invariant violation; indicates a bug, not a user error.
class InternalError : public Error {
public:
    using Error::Error;
};

} // namespace ldb
