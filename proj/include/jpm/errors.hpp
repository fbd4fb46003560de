#ifndef JPM_ERRORS_HPP
#define JPM_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace jpm {

/// Base class for all simulator errors.
class SimError : public std::runtime_error {
public:
    explicit SimError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Fock-space truncation is inadequate for the requested amplitude,
/// or population has leaked into the top Fock level during evolution.
class TruncationError : public SimError {
public:
    explicit TruncationError(const std::string& msg) : SimError(msg) {}
};

/// Operator or state dimensions do not match the Hilbert-space layout.
class DimensionMismatch : public SimError {
public:
    explicit DimensionMismatch(const std::string& msg) : SimError(msg) {}
};

/// Integration step size rejected, or state invariants violated mid-run
/// even after the automatic retry at halved step size.
class StepSizeError : public SimError {
public:
    explicit StepSizeError(const std::string& msg) : SimError(msg) {}
};

/// A state was annihilated by an operation that must renormalize.
class ZeroNormError : public SimError {
public:
    explicit ZeroNormError(const std::string& msg) : SimError(msg) {}
};

/// A series evaluation failed to meet its tail bound.
class ConvergenceError : public SimError {
public:
    explicit ConvergenceError(const std::string& msg) : SimError(msg) {}
};

/// A matrix routine left its numerical tolerance (e.g. a matrix square
/// root applied to an input that is not positive semidefinite).
class NumericalError : public SimError {
public:
    explicit NumericalError(const std::string& msg) : SimError(msg) {}
};

/// A conditional-state branch has zero probability.
class DegenerateBranchError : public SimError {
public:
    explicit DegenerateBranchError(const std::string& msg) : SimError(msg) {}
};

/// Configuration file failed validation; message carries the key path.
class ConfigError : public SimError {
public:
    explicit ConfigError(const std::string& msg) : SimError(msg) {}
};

} // namespace jpm

#endif
