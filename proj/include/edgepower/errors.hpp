#pragma once

#include <stdexcept>
#include <string>

namespace edgepower {

// Argument outside the documented domain of an operation (|rho| bounds, alpha
// range, grid shape, sample counts, ...).
class DomainError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// A matrix that must be symmetric positive definite is not. First-class error:
// definiteness failures are never silently repaired.
class DefinitenessError : public DomainError {
public:
    using DomainError::DomainError;
};

// Two models with incompatible dimensions were combined.
class DimensionError : public DomainError {
public:
    using DomainError::DomainError;
};

}  // namespace edgepower
