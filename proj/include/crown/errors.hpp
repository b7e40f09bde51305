#pragma once

#include <stdexcept>
#include <string>

namespace crown {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed input file or unreadable path.
class ParseError : public Error {
public:
    using Error::Error;
};

/// Dimensions that do not chain.
class ShapeError : public Error {
public:
    using Error::Error;
};

/// NaN/Inf entries, out-of-range indices and other bad arguments.
class ValueError : public Error {
public:
    using Error::Error;
};

/// A method that cannot run on the given network or norm.
class UnsupportedError : public Error {
public:
    using Error::Error;
};

}  // namespace crown
