// error.hpp: exception types shared by the optomech headers

#pragma once

#include <stdexcept>
#include <string>

namespace optomech {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A parameter or argument violates its documented invariant.
class InvalidInput : public Error {
public:
    using Error::Error;
};

/// The requested time lies outside the validity regime of an approximation.
class RegimeError : public InvalidInput {
public:
    using InvalidInput::InvalidInput;
};

/// A numerical procedure did not reach its tolerance.
class NumericalFailure : public Error {
public:
    NumericalFailure(const std::string& what, double estimate = 0.0)
        : Error(what), estimate_(estimate) {}

    /// Worst error estimate at the point of failure (panel error, drift, ...).
    double estimate() const noexcept { return estimate_; }

private:
    double estimate_;
};

/// Population reached the edge of a truncated Fock space.
class TruncationError : public NumericalFailure {
public:
    TruncationError(const std::string& what, std::string factor, double leakage)
        : NumericalFailure(what, leakage), factor_(std::move(factor)) {}

    /// "photon" or "oscillator".
    const std::string& factor() const noexcept { return factor_; }

private:
    std::string factor_;
};

/// Trace drift indicates the integration step is too coarse.
class StepSizeError : public NumericalFailure {
public:
    using NumericalFailure::NumericalFailure;
};

} // namespace optomech
