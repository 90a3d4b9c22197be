#pragma once

#include <stdexcept>
#include <string>

namespace fstl {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Incompatible tensor or parameter shapes.
class ShapeError : public Error {
public:
    using Error::Error;
};

/// Malformed serialized input (weight files, IDX files).
class FormatError : public Error {
public:
    using Error::Error;
};

/// Invalid user-supplied configuration. The CLI maps this to exit code 1.
class ConfigError : public Error {
public:
    using Error::Error;
};

}  // namespace fstl
