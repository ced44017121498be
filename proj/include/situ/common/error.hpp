#pragma once

#include <stdexcept>
#include <string>

namespace situ {

// Failure categories double as CLI exit codes.
enum class ErrorKind {
    generic = 1,
    config = 2,
    schema = 3,
    numerical = 4,
    precondition = 5,
    io = 6,
};

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

class ShapeError : public Error {
public:
    explicit ShapeError(const std::string& what) : Error(ErrorKind::generic, "shape: " + what) {}
};

class NumericError : public Error {
public:
    explicit NumericError(const std::string& what) : Error(ErrorKind::numerical, what) {}
};

class ConfigError : public Error {
public:
    explicit ConfigError(const std::string& what) : Error(ErrorKind::config, what) {}
};

class SchemaError : public Error {
public:
    explicit SchemaError(const std::string& what) : Error(ErrorKind::schema, what) {}
};

class PreconditionError : public Error {
public:
    explicit PreconditionError(const std::string& what) : Error(ErrorKind::precondition, what) {}
};

class IoError : public Error {
public:
    explicit IoError(const std::string& what) : Error(ErrorKind::io, what) {}
};

int exit_code(ErrorKind kind);

}  // namespace situ
