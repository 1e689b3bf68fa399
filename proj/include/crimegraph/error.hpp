#pragma once

#include <stdexcept>
#include <string>

namespace crimegraph {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Caller passed arguments that violate an operation's precondition.
class InvalidArgument : public Error {
public:
    using Error::Error;
};

/// Input data could not be read or decoded (files, formats, schemas).
class DataError : public Error {
public:
    using Error::Error;
};

} // namespace crimegraph
