#pragma once

#include <stdexcept>
#include <string>

namespace afgn {

// Bad flags, missing columns, inconsistent dimensions.
struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// Malformed input files, unusable corpora.
struct DataError : std::runtime_error {
    explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

// Non-finite losses, shape mismatches, autodiff misuse.
struct NumericError : std::runtime_error {
    explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace afgn
