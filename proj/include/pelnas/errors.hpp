#pragma once

#include <stdexcept>
#include <string>

namespace pelnas {

// Error hierarchy. The CLI maps each family onto a fixed exit code:
// ConfigError -> 2, DataError / NotFoundError -> 3, ServiceError -> 4.

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ConfigError : Error {
    using Error::Error;
};

struct DataError : Error {
    using Error::Error;
};

struct NotFoundError : DataError {
    using DataError::DataError;
};

struct ParseError : Error {
    using Error::Error;
};

struct OverflowError : Error {
    using Error::Error;
};

struct ServiceError : Error {
    using Error::Error;
};

} // namespace pelnas
