#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace nlufix {

// Base for every error the library raises. `code()` is a stable identifier
// used by the CLI exit-code mapping and the HTTP error payloads.
class Error : public std::runtime_error {
public:
    Error(std::string code, const std::string& message)
        : std::runtime_error(message), code_(std::move(code)) {}

    const std::string& code() const noexcept { return code_; }

private:
    std::string code_;
};

// Bad input data: malformed records, unknown labels, out-of-range values.
class ValidationError : public Error {
public:
    using Error::Error;
};

// Caller misuse: invalid configuration or arguments.
class ConfigError : public Error {
public:
    explicit ConfigError(const std::string& message) : Error("ConfigError", message) {}
};

} // namespace nlufix
