#pragma once

#include <stdexcept>
#include <string>

namespace intrakd {

/// Base for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Tensor extents do not line up with what an operation requires.
class ShapeError : public Error {
public:
    using Error::Error;
};

/// A class index or coordinate is outside its valid range.
class IndexError : public Error {
public:
    using Error::Error;
};

/// Invalid configuration value (kernel size, temperature, network layout...).
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Caller broke an API precondition that is not a pure shape problem.
class ContractError : public Error {
public:
    using Error::Error;
};

/// On-disk data is malformed or inconsistent.
class FormatError : public Error {
public:
    using Error::Error;
};

/// A text document (JSON, config) could not be parsed.
class ParseError : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

}  // namespace intrakd
