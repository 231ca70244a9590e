#pragma once

#include <stdexcept>
#include <string>

namespace upe {

// Error categories map one-to-one onto CLI exit codes.
enum class ErrorKind {
    Validation = 1,  // bad configuration or argument
    Data = 2,        // unreadable, malformed or insufficient data
    Constraint = 3,  // procurement constraint violated during simulation
};

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}

    [[nodiscard]] ErrorKind kind() const noexcept { return kind_; }
    [[nodiscard]] int exit_code() const noexcept { return static_cast<int>(kind_); }

private:
    ErrorKind kind_;
};

class ValidationError : public Error {
public:
    explicit ValidationError(const std::string& what) : Error(ErrorKind::Validation, what) {}
};

class DataError : public Error {
public:
    explicit DataError(const std::string& what) : Error(ErrorKind::Data, what) {}
};

/// Malformed input row; carries the 1-based line number of the offending row.
class ParseError : public DataError {
public:
    ParseError(std::size_t line, const std::string& what)
        : DataError("line " + std::to_string(line) + ": " + what), line_(line) {}

    [[nodiscard]] std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

/// Raised when fewer samples exist than an operation needs (window, filter, dataset).
class InsufficientDataError : public DataError {
public:
    explicit InsufficientDataError(const std::string& what) : DataError(what) {}
};

class ConstraintViolation : public Error {
public:
    explicit ConstraintViolation(const std::string& what) : Error(ErrorKind::Constraint, what) {}
};

}  // namespace upe
