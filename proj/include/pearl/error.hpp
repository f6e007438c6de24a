#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace pearl {

enum class ErrorKind { io, validation, numerical };

inline std::string_view to_string(ErrorKind kind)
{
    switch (kind) {
    case ErrorKind::io: return "io";
    case ErrorKind::validation: return "validation";
    case ErrorKind::numerical: return "numerical";
    }
    return "unknown";
}

/// Process exit code associated with each error kind (0 is success).
inline int exit_code(ErrorKind kind)
{
    switch (kind) {
    case ErrorKind::io: return 2;
    case ErrorKind::validation: return 3;
    case ErrorKind::numerical: return 4;
    }
    return 1;
}

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

class IoError : public Error {
public:
    explicit IoError(const std::string& what) : Error(ErrorKind::io, what) {}
};

class ValidationError : public Error {
public:
    explicit ValidationError(const std::string& what) : Error(ErrorKind::validation, what) {}
};

class NumericalError : public Error {
public:
    explicit NumericalError(const std::string& what) : Error(ErrorKind::numerical, what) {}
};

} // namespace pearl
