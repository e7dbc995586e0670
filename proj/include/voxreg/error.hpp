#pragma once

#include <stdexcept>
#include <string>

namespace voxreg {

// Base error type. The `code` is a stable machine-readable identifier that the
// CLI surfaces in its error JSON ("shape_mismatch", "invalid_value", ...).
class Error : public std::runtime_error {
public:
    Error(std::string code, const std::string& message)
        : std::runtime_error(message), code_(std::move(code)) {}

    const std::string& code() const { return code_; }

private:
    std::string code_;
};

class ValidationError : public Error {
public:
    explicit ValidationError(const std::string& message)
        : Error("invalid_value", message) {}
};

class ShapeMismatchError : public Error {
public:
    explicit ShapeMismatchError(const std::string& message)
        : Error("shape_mismatch", message) {}
};

class IoError : public Error {
public:
    explicit IoError(const std::string& message)
        : Error("io_error", message) {}
};

} // namespace voxreg
