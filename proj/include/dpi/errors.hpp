#pragma once

#include <stdexcept>
#include <string>

namespace dpi {

// Base for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Configuration problems: the user-facing CLI maps these to exit status 1.
class ConfigError : public Error {
public:
    using Error::Error;
};

class ParseError : public ConfigError {
public:
    using ConfigError::ConfigError;
};

class ValidationError : public ConfigError {
public:
    ValidationError(std::string path, const std::string& what)
        : ConfigError(path + ": " + what), path_(std::move(path)) {}

    const std::string& path() const noexcept { return path_; }

private:
    std::string path_;
};

class OutOfRange : public Error {
public:
    using Error::Error;
};

class NonConvergence : public Error {
public:
    using Error::Error;
};

class EmptySeries : public Error {
public:
    using Error::Error;
};

class WindowTooSmall : public Error {
public:
    using Error::Error;
};

class ImbalanceError : public Error {
public:
    using Error::Error;
};

} // namespace dpi
