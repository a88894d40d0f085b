#pragma once

#include <stdexcept>
#include <string>

namespace seglab {

// Error taxonomy shared by all modules. The C API and the CLI map these
// onto stable numeric codes (see include/seglab/seglab.h).
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Invalid arguments, shape mismatches, values outside documented ranges.
class DomainError : public Error {
public:
    explicit DomainError(const std::string& msg) : Error(msg) {}
};

// Malformed file contents.
class FormatError : public Error {
public:
    explicit FormatError(const std::string& msg) : Error(msg) {}
};

// Payload ends before the header-declared size.
class TruncationError : public FormatError {
public:
    explicit TruncationError(const std::string& msg) : FormatError(msg) {}
};

// Filesystem failures (open/read/write).
class IoError : public Error {
public:
    explicit IoError(const std::string& msg) : Error(msg) {}
};

// Operation invoked in an invalid sequence (e.g. backward without forward).
class StateError : public Error {
public:
    explicit StateError(const std::string& msg) : Error(msg) {}
};

// Non-finite values where finite math is required.
class NumericError : public Error {
public:
    explicit NumericError(const std::string& msg) : Error(msg) {}
};

// Unknown or ill-typed configuration keys.
class ConfigError : public Error {
public:
    explicit ConfigError(const std::string& msg) : Error(msg) {}
};

} // namespace seglab
