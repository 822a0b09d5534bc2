#pragma once

#include <stdexcept>
#include <string>

namespace ganlab {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Operand shapes do not conform to an operation.
class ShapeError : public Error {
public:
    using Error::Error;
};

// Input outside the mathematical domain of an operation (log of <= 0, ...).
class DomainError : public Error {
public:
    using Error::Error;
};

// Invalid configuration: rejected before any work is done.
class ConfigError : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

// Raised by the optimizer when a gradient entry is NaN or infinite.
class NonFiniteError : public Error {
public:
    NonFiniteError(const std::string& what, std::string name)
      : Error(what), name_(std::move(name))
    { }

    const std::string& name() const noexcept { return name_; }

private:
    std::string name_;
};

} // namespace ganlab
