#pragma once

#include <stdexcept>
#include <string>

namespace flexkit {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Caller violated a precondition (bad argument, schema mismatch, out of range).
class InvalidArgument : public Error {
public:
    using Error::Error;
};

/// Filesystem or network I/O failed.
class IoError : public Error {
public:
    using Error::Error;
};

/// On-disk or on-wire data does not have the expected layout.
class FormatError : public Error {
public:
    using Error::Error;
};

/// A lookup key (doc id, index ref, prediction id) was not found.
class NotFound : public Error {
public:
    using Error::Error;
};

[[noreturn]] void throw_errno(const std::string &what);

} // namespace flexkit
