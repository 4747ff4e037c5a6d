#pragma once

#include <stdexcept>
#include <string>

namespace zoneval {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// File missing or unreadable.
struct IoError : Error {
    using Error::Error;
};

// Malformed JSON; message carries the byte offset.
struct ParseError : Error {
    using Error::Error;
};

// Required key missing or wrong type; message names the key.
struct SchemaError : Error {
    using Error::Error;
};

// Dangling id references; message lists the offenders.
struct IntegrityError : Error {
    using Error::Error;
};

// Value outside its allowed range (e.g. detection score).
struct RangeError : Error {
    using Error::Error;
};

// Invalid operation input (non-partition zone list, n = 0, ...).
struct InputError : Error {
    using Error::Error;
};

// Invalid run or assigner configuration.
struct ConfigError : Error {
    using Error::Error;
};

// A documented precondition was violated by the caller.
struct ContractViolation : Error {
    using Error::Error;
};

}  // namespace zoneval
