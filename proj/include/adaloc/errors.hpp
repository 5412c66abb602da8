#pragma once

#include <stdexcept>
#include <string>

namespace adaloc {

// Error taxonomy shared by the library and the CLI exit-code mapping:
// ValidationError and its siblings map to exit 1, IoError to exit 2.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct DimensionError : Error {
    using Error::Error;
};

struct IndexError : Error {
    using Error::Error;
};

struct ValidationError : Error {
    using Error::Error;
};

struct StaleKeyError : ValidationError {
    using ValidationError::ValidationError;
};

struct ContractError : Error {
    using Error::Error;
};

struct NumericError : Error {
    using Error::Error;
};

struct IoError : Error {
    using Error::Error;
};

struct ParseError : IoError {
    using IoError::IoError;
};

}  // namespace adaloc
