#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace mxe {

// Base for every error raised by the library. Kinds map onto HTTP status
// classes in the session API.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class InvalidArgument : public Error {
public:
    using Error::Error;
};

class InvalidConstraint : public Error {
public:
    using Error::Error;
};

class ParseError : public Error {
public:
    ParseError(std::size_t line, std::size_t column, const std::string& what)
        : Error("line " + std::to_string(line) + ", column " + std::to_string(column) + ": " + what),
          line_(line),
          column_(column) {}

    std::size_t line() const { return line_; }
    std::size_t column() const { return column_; }

private:
    std::size_t line_;
    std::size_t column_;
};

// The model no longer matches the registered constraints, or a fit is running.
class StaleModel : public Error {
public:
    using Error::Error;
};

class NotFound : public Error {
public:
    using Error::Error;
};

class Conflict : public Error {
public:
    using Error::Error;
};

}  // namespace mxe
