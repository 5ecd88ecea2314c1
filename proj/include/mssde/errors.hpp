#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace mssde {

/// Base class for all library errors.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

/// Invalid argument to an operation (negative time, bad shape, ...).
class ArgumentError : public Error {
public:
    using Error::Error;
};

/// A model specification is malformed or violates a structural invariant.
class ModelSpecError : public Error {
public:
    using Error::Error;
};

/// The generator is reducible (or numerically indistinguishable from
/// reducible) at the requested point.
class IrreducibilityError : public Error {
public:
    using Error::Error;
};

/// A stated precondition failed; the message names the violated quantity.
class PreconditionError : public Error {
public:
    using Error::Error;
};

/// A matrix expected to be positive semidefinite has an eigenvalue below
/// the clamp tolerance.
class NotPsdError : public Error {
public:
    NotPsdError(const std::string& msg, double eigenvalue)
        : Error(msg), offending_eigenvalue(eigenvalue) {}
    double offending_eigenvalue;
};

/// A run was requested whose validity requires the switching-independent
/// diffusion hypothesis sigma(x, i) = sigma(x). Mapped to exit code 2 by
/// the CLI.
class HypothesisError : public Error {
public:
    using Error::Error;
};

/// A simulated path left the representable range (overflow / NaN).
class PathDivergedError : public Error {
public:
    PathDivergedError(const std::string& msg, std::size_t step)
        : Error(msg), step_index(step) {}
    std::size_t step_index;
};

/// A chain segment exceeded the jump-count safety valve.
class StiffnessError : public Error {
public:
    using Error::Error;
};

}  // namespace mssde
