#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace byzsim {

// Base class for everything this library throws on purpose.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Invalid numeric input (NaN/inf where a finite value is required).
struct DomainError : Error {
    using Error::Error;
};

// Mismatched vector/matrix dimensions.
struct ShapeError : Error {
    using Error::Error;
};

// Fewer inputs than the operation is defined for.
struct InsufficientDataError : Error {
    using Error::Error;
};

// Parameters outside an operation's admissible range (n/m constraints etc).
struct ConfigError : Error {
    using Error::Error;
};

// Malformed input file; carries the byte offset where parsing stopped.
struct FormatError : Error {
    std::size_t byte_offset;
    FormatError(const std::string& what, std::size_t offset)
        : Error(what + " (byte offset " + std::to_string(offset) + ")"),
          byte_offset(offset) {}
};

// Filesystem failure; message includes the offending path.
struct IoError : Error {
    using Error::Error;
};

} // namespace byzsim
