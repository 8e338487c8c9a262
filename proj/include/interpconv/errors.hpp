#pragma once

#include <stdexcept>
#include <string>

namespace interpconv {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Invalid numeric parameter (tau, beta, alpha, grid index, ...).
class ParameterError : public Error {
public:
    using Error::Error;
};

class ShapeError : public Error {
public:
    using Error::Error;
};

// Empty or otherwise unusable input collection.
class InputError : public Error {
public:
    using Error::Error;
};

// Operation requires state that has not been established yet.
class StateError : public Error {
public:
    using Error::Error;
};

// Missing, malformed or truncated files.
class DataError : public Error {
public:
    using Error::Error;
};

class NumericalError : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

}  // namespace interpconv
