#pragma once

#include <stdexcept>
#include <string>

namespace csvc {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Caller handed in something that violates an operation's preconditions
/// (dimension mismatch, bad parameter range, non-finite data).
class InvalidArgument : public Error {
public:
    using Error::Error;
};

/// Filesystem level failure: missing file, unreadable directory, short write.
class IoError : public Error {
public:
    using Error::Error;
};

/// Malformed, truncated or corrupt encoded data.
class FormatError : public Error {
public:
    using Error::Error;
};

}  // namespace csvc
