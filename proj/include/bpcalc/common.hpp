// common.hpp — shared error types and small helpers

#pragma once

#include <cmath>
#include <complex>
#include <stdexcept>
#include <string>

namespace bpcalc {

using Complex = std::complex<double>;

// Base class for all library errors.
struct CalcError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ArityMismatch : CalcError {
    using CalcError::CalcError;
};

// Argument outside the admissible domain (positive s, negative u, non-finite input).
struct DomainError : CalcError {
    using CalcError::CalcError;
};

// The requested operation needs a finite moment the function does not have,
// e.g. the first moment of the frac_power Levy density.
struct MomentInfinite : CalcError {
    using CalcError::CalcError;
};

struct UnsupportedCatalog : CalcError {
    using CalcError::CalcError;
};

struct SingularResolvent : CalcError {
    using CalcError::CalcError;
};

struct NotSimultaneouslyDiagonalizable : CalcError {
    using CalcError::CalcError;
};

struct CommutationFailure : CalcError {
    using CalcError::CalcError;
};

// Constructor-level invariant violation (negative mass, point outside R_+^n, ...).
struct InvariantViolation : CalcError {
    using CalcError::CalcError;
};

struct ConfigError : CalcError {
    using CalcError::CalcError;
};

inline bool is_finite(double x) { return std::isfinite(x); }

inline bool is_finite(const Complex& z) {
    return std::isfinite(z.real()) && std::isfinite(z.imag());
}

} // namespace bpcalc
