#pragma once

#include <stdexcept>
#include <string>

namespace infogap {

// All library failures derive from Error so callers can catch one type.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Invalid configuration values or missing required settings.
class ConfigError : public Error {
public:
    using Error::Error;
};

// Input whose structure does not match what an operation expects.
class InputError : public Error {
public:
    using Error::Error;
};

// Mathematically invalid arguments (zero vectors, asymmetric matrices, ...).
class DomainError : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

class CorruptionError : public Error {
public:
    using Error::Error;
};

class UnsupportedVersionError : public Error {
public:
    using Error::Error;
};

class TransportError : public Error {
public:
    TransportError(const std::string& what, std::size_t batch_index)
        : Error(what), batch_index_(batch_index) {}
    std::size_t batch_index() const noexcept { return batch_index_; }

private:
    std::size_t batch_index_;
};

class ProtocolError : public Error {
public:
    using Error::Error;
};

class ConvergenceError : public Error {
public:
    using Error::Error;
};

}  // namespace infogap
