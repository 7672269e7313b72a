#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace lipschitz_lr {

/// Base for every error the library throws.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class DimensionError : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

class ParseError : public Error {
public:
    ParseError(const std::string& what, std::size_t line)
        : Error("line " + std::to_string(line) + ": " + what), line_(line) {}

    /// 1-based line number in the source file.
    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

/// A feature column whose scaling divisor would be (near) zero.
class DegenerateFeatureError : public Error {
public:
    DegenerateFeatureError(const std::string& what, std::size_t column)
        : Error(what), column_(column) {}

    std::size_t column() const noexcept { return column_; }

private:
    std::size_t column_;
};

class InvalidBoundError : public Error {
public:
    using Error::Error;
};

class InvalidClassCountError : public Error {
public:
    using Error::Error;
};

class InvalidToleranceError : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

/// Zero gradients or zero activations where a Lipschitz estimate needs them.
class DegenerateError : public Error {
public:
    using Error::Error;
};

/// Non-finite values appeared during training.
class DivergenceError : public Error {
public:
    using Error::Error;
};

class UnsupportedMetricError : public Error {
public:
    using Error::Error;
};

}  // namespace lipschitz_lr
