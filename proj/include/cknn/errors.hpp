#pragma once

#include <stdexcept>
#include <string>

namespace cknn {

/// Base class for all library errors. Each carries a short machine-readable
/// code (stable across releases) next to the human-readable message.
class Error : public std::runtime_error {
public:
    Error(std::string code, const std::string& message)
        : std::runtime_error(message), code_(std::move(code)) {}

    const std::string& code() const noexcept { return code_; }

private:
    std::string code_;
};

class CsvError : public Error {
public:
    explicit CsvError(const std::string& msg) : Error("csv", msg) {}
};

class ValidationError : public Error {
public:
    explicit ValidationError(const std::string& msg) : Error("validation", msg) {}
};

class DimensionError : public Error {
public:
    explicit DimensionError(const std::string& msg) : Error("dimension", msg) {}
};

/// Raised when an IPW value is 0/0: no subject matches the regime.
class UndefinedValueError : public Error {
public:
    explicit UndefinedValueError(const std::string& msg) : Error("undefined_value", msg) {}
};

class TuningError : public Error {
public:
    explicit TuningError(const std::string& msg) : Error("tuning", msg) {}
};

class ModelFormatError : public Error {
public:
    explicit ModelFormatError(const std::string& msg) : Error("model_format", msg) {}
};

class InvalidArgumentError : public Error {
public:
    explicit InvalidArgumentError(const std::string& msg) : Error("invalid_argument", msg) {}
};

}  // namespace cknn
