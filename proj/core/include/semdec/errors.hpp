#pragma once

#include <stdexcept>
#include <string>

namespace semdec {

// Base type for everything this library throws on purpose.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Violated precondition, invariant or API contract. CLI exit code 1.
struct ContractError : Error {
    using Error::Error;
};

// Bad configuration file, flag value or spec. CLI exit code 1.
struct ConfigError : Error {
    using Error::Error;
};

// Malformed or unreadable input data. CLI exit code 2.
struct DataError : Error {
    using Error::Error;
};

// Training produced a non-finite loss; message names the epoch.
struct DivergenceError : Error {
    using Error::Error;
};

}  // namespace semdec
