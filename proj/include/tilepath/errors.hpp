#pragma once
#include <stdexcept>
#include <string>

namespace tilepath {

// Error taxonomy shared across the library. The CLI maps these onto exit
// codes: ConfigError -> 2, IoError -> 3, ValidationError -> 4.
struct Error : std::runtime_error {
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

struct DimensionError : Error {
    explicit DimensionError(const std::string& msg) : Error(msg) {}
};

struct ConfigError : Error {
    explicit ConfigError(const std::string& msg) : Error(msg) {}
};

struct DataError : Error {
    explicit DataError(const std::string& msg) : Error(msg) {}
};

struct GeometryError : Error {
    explicit GeometryError(const std::string& msg) : Error(msg) {}
};

struct FormatError : Error {
    explicit FormatError(const std::string& msg) : Error(msg) {}
};

struct IoError : Error {
    explicit IoError(const std::string& msg) : Error(msg) {}
};

struct ValidationError : Error {
    explicit ValidationError(const std::string& msg) : Error(msg) {}
};

struct StateError : Error {
    explicit StateError(const std::string& msg) : Error(msg) {}
};

}  // namespace tilepath
