#pragma once

#include <stdexcept>
#include <string>

namespace nmtattack {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct DimensionError : Error { using Error::Error; };
struct IndexError : Error { using Error::Error; };
struct LengthError : Error { using Error::Error; };
struct SimplexError : Error { using Error::Error; };
struct DegenerateVectorError : Error { using Error::Error; };
struct ConfigError : Error { using Error::Error; };
struct FormatError : Error { using Error::Error; };
struct InputError : Error { using Error::Error; };
struct DivergenceError : Error { using Error::Error; };
struct IoError : Error { using Error::Error; };
struct UndefinedRatioError : Error { using Error::Error; };

}  // namespace nmtattack
