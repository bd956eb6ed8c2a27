#pragma once

#include <stdexcept>
#include <string>

namespace lpnsr {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Bad configuration value or schedule parameter.
struct ConfigError : Error {
    using Error::Error;
};

// Tensor shape/size disagreement.
struct DimensionError : Error {
    using Error::Error;
};

// Operation called outside its mathematical domain (e.g. optimal noise at t=1).
struct DomainError : Error {
    using Error::Error;
};

// Malformed file: bad magic, version, or truncation.
struct FormatError : Error {
    using Error::Error;
};

// Filesystem-level failure.
struct IoError : Error {
    using Error::Error;
};

}  // namespace lpnsr
