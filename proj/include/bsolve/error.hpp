#pragma once

#include <stdexcept>
#include <string>

namespace bsolve {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Invalid sigma, lambda, iteration count, epsilon, and similar.
class ParameterError : public Error {
public:
    using Error::Error;
};

/// Mismatched raster or vector sizes.
class DimensionError : public Error {
public:
    using Error::Error;
};

/// Non-finite values or breakdown inside an iterative method.
class NumericalError : public Error {
public:
    using Error::Error;
};

/// Unreadable or malformed files.
class IoError : public Error {
public:
    using Error::Error;
};

namespace detail {

inline void require_size(std::size_t got, std::size_t want, const char* what)
{
    if (got != want) {
        throw DimensionError(std::string(what) + ": expected length " + std::to_string(want) +
                             ", got " + std::to_string(got));
    }
}

}  // namespace detail
}  // namespace bsolve
