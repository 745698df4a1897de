#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace rtplan {

/// Base class for all library errors.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Operand shapes do not match (vector lengths, matrix dimensions, plan size).
struct DimensionError : Error {
    using Error::Error;
};

/// Argument outside the mathematical domain of an operation.
struct DomainError : Error {
    using Error::Error;
};

/// Bad or inconsistent configuration input.
struct ConfigError : Error {
    using Error::Error;
};

/// The prox minimization is unbounded below (penalty parameter too large).
struct UnboundedProxError : Error {
    using Error::Error;
};

/// A prox denominator is exactly zero (penalty parameter at the threshold).
struct DegenerateProxError : Error {
    using Error::Error;
};

/// Constraint quadratic has a negative diagonal entry.
struct DegenerateConstraintError : Error {
    using Error::Error;
};

/// Iteration caps exceeded, bracketing failed, or a factorization broke down.
struct NumericalError : Error {
    using Error::Error;
};

/// The solver could not produce a feasible fluence map.
struct InfeasibleError : Error {
    InfeasibleError(const std::string& msg, std::vector<int> violated_constraints)
        : Error(msg), violated(std::move(violated_constraints)) {}
    /// Flat indices of the constraints still violated when the solver gave up.
    std::vector<int> violated;
};

}  // namespace rtplan
