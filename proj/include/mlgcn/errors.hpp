#pragma once

#include <stdexcept>
#include <string>

namespace mlgcn {

// Base class for all library errors. Subcategories let the CLI map failures
// to one-line diagnostics without string matching.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Tensor rank/dimension violations.
class ShapeError : public Error {
public:
    using Error::Error;
};

// Bad input data: non-finite values, unknown labels, malformed text files.
class DataError : public Error {
public:
    using Error::Error;
};

// Out-of-range configuration values (tau, p, learning rate, layer dims).
class ConfigError : public Error {
public:
    using Error::Error;
};

// Binary file format violations (magic, version, truncation).
class FormatError : public Error {
public:
    using Error::Error;
};

// API misuse: backward twice, gradient of an untracked tensor.
class UsageError : public Error {
public:
    using Error::Error;
};

// Runtime training failures (non-finite loss or gradient).
class TrainingError : public Error {
public:
    using Error::Error;
};

// Filesystem-level failures (unreadable or unwritable paths).
class IoError : public Error {
public:
    using Error::Error;
};

} // namespace mlgcn
