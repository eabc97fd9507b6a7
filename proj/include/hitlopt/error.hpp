#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace hitlopt {

// Base class for every error raised by the library. The CLI maps
// ValidationError (and subclasses) to exit code 2 and everything else to 3.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ValidationError : public Error {
public:
    using Error::Error;
};

class SchemaError : public ValidationError {
public:
    SchemaError(const std::string& msg, std::string column)
        : ValidationError(msg), column_(std::move(column)) {}
    const std::string& column() const noexcept { return column_; }

private:
    std::string column_;
};

class ParseError : public ValidationError {
public:
    ParseError(const std::string& msg, std::size_t row, std::string column)
        : ValidationError(msg), row_(row), column_(std::move(column)) {}
    // 1-based data row (the header is row 0).
    std::size_t row() const noexcept { return row_; }
    const std::string& column() const noexcept { return column_; }

private:
    std::size_t row_;
    std::string column_;
};

class EmptyInputError : public ValidationError {
public:
    using ValidationError::ValidationError;
};

// Raised when a statistic is mathematically undefined for the input,
// e.g. the correlation of a constant vector.
class NumericError : public Error {
public:
    using Error::Error;
};

} // namespace hitlopt
