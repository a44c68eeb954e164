#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace histbayes {

/// Root of every exception thrown by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// workspace parsing
class SyntaxError : public Error {
public:
    using Error::Error;
};

class SchemaError : public Error {
public:
    SchemaError(std::string path, const std::string& what)
        : Error(path + ": " + what), path_(std::move(path)) {}
    const std::string& path() const noexcept { return path_; }

private:
    std::string path_;
};

class ValidationError : public Error {
public:
    ValidationError(std::string path, const std::string& what)
        : Error(path + ": " + what), path_(std::move(path)) {}
    const std::string& path() const noexcept { return path_; }

private:
    std::string path_;
};

// numerics
class DimensionError : public Error {
public:
    using Error::Error;
};

class DomainError : public Error {
public:
    using Error::Error;
};

class MissingPriorError : public Error {
public:
    using Error::Error;
};

class ImproperPriorError : public Error {
public:
    using Error::Error;
};

// sampling
class InitializationError : public Error {
public:
    using Error::Error;
};

class NonFiniteGradientError : public Error {
public:
    using Error::Error;
};

/// Sampler failure inside a multi-chain run, tagged with the chain index.
class ChainError : public Error {
public:
    ChainError(std::size_t chain, const std::string& what)
        : Error("chain " + std::to_string(chain) + ": " + what), chain_(chain) {}
    std::size_t chain() const noexcept { return chain_; }

private:
    std::size_t chain_;
};

// diagnostics
class InsufficientDataError : public Error {
public:
    using Error::Error;
};

class NoFiniteThinningError : public Error {
public:
    using Error::Error;
};

class ShapeError : public Error {
public:
    using Error::Error;
};

// predictive
class EmptyChainError : public Error {
public:
    using Error::Error;
};

/// Raised when too many pseudo-experiments of a calibration run fail to sample.
class CalibrationAbort : public Error {
public:
    using Error::Error;
};

}  // namespace histbayes
