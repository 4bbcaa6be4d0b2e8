#pragma once

#include <stdexcept>
#include <string>

namespace gfad {

// Matrix or vector shapes that do not fit the operation.
class DimensionError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// I + c S^H Sigma^-1 S is not positive definite; the rank update is unusable.
class SingularUpdateError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// A covariance that should be Hermitian positive definite failed to factor.
class ConditioningError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Every real number is a root (all coefficients vanish).
class DegeneratePolynomialError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

// Requested operation exceeds a documented size cap (e.g. MVB enumeration).
class CapabilityError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Invalid user-supplied configuration value.
class ConfigError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// Experiment-level failure (too many detector failures, etc.).
class ExperimentError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

} // namespace gfad
