#pragma once

#include <stdexcept>
#include <string>

namespace kix {

// Error categories map to CLI exit codes: ConfigError -> 2, IoError -> 3,
// NumericError -> 4, anything else -> 1.
struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

struct IoError : std::runtime_error {
    explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

struct NumericError : std::runtime_error {
    explicit NumericError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace kix
