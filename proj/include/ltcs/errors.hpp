#pragma once

#include <stdexcept>
#include <string>

namespace ltcs {

// Error taxonomy shared by the library and the CLI exit-code mapping.
struct ConfigError : std::runtime_error {
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

struct DataError : std::runtime_error {
    explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

struct NumericalError : std::runtime_error {
    explicit NumericalError(const std::string& msg) : std::runtime_error(msg) {}
};

struct ProtocolError : std::runtime_error {
    explicit ProtocolError(const std::string& msg) : std::runtime_error(msg) {}
};

// Serving-side lifecycle misuse (e.g. scoring through an unloaded shard).
struct StateError : ProtocolError {
    explicit StateError(const std::string& msg) : ProtocolError(msg) {}
};

}  // namespace ltcs
