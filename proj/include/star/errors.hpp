#pragma once

#include <stdexcept>
#include <string>

namespace star {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Incompatible shapes in an array operation.
class DimensionError : public Error {
public:
    using Error::Error;
};

// NaN/Inf surfaced by a computation, or a non-finite loss/gradient.
class NumericError : public Error {
public:
    using Error::Error;
};

// Malformed or inconsistent input data.
class DataError : public Error {
public:
    using Error::Error;
};

// Invalid configuration values or mismatched checkpoints.
class ConfigError : public Error {
public:
    using Error::Error;
};

} // namespace star
