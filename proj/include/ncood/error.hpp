#pragma once

#include <stdexcept>
#include <string>

namespace ncood {

/// Base class for every error raised by the toolkit.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Violated precondition: shape mismatch, bad argument, missing role.
class ContractError : public Error {
public:
    using Error::Error;
};

/// A statistic or auxiliary model cannot be fit from the given data.
class FitError : public Error {
public:
    using Error::Error;
};

/// Malformed tensor header or manifest.
class FormatError : public Error {
public:
    using Error::Error;
};

/// Payload shorter than the header declares.
class LengthError : public FormatError {
public:
    LengthError(const std::string& what, std::size_t expected, std::size_t actual)
        : FormatError(what), expected_(expected), actual_(actual) {}

    std::size_t expected() const { return expected_; }
    std::size_t actual() const { return actual_; }

private:
    std::size_t expected_;
    std::size_t actual_;
};

/// Filesystem or stream failure.
class IoError : public Error {
public:
    using Error::Error;
};

/// Bundle contents disagree with each other (e.g. label count vs rows).
class ConsistencyError : public Error {
public:
    using Error::Error;
};

/// Numerical breakdown: divergence, NaN loss.
class NumericalError : public Error {
public:
    using Error::Error;
};

/// Synthetic data generation could not satisfy its constraints.
class GenerationError : public Error {
public:
    using Error::Error;
};

}  // namespace ncood
