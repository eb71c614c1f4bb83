#pragma once

#include <stdexcept>
#include <string>

namespace nsp {

/// Invalid argument or configuration value (out of range, non-finite, degenerate).
class ParameterError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// A nonlinearity was evaluated outside its domain (e.g. a nonpositive base under a fractional power).
class DomainError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

/// Density reached (or fell below) the vacuum guard.
class VacuumError : public std::runtime_error {
public:
    VacuumError(const std::string& what, double time) : std::runtime_error(what), time_(time) {}
    double time() const noexcept { return time_; }

private:
    double time_;
};

/// Non-finite values appeared during time stepping.
class NumericalError : public std::runtime_error {
public:
    NumericalError(const std::string& what, double time) : std::runtime_error(what), time_(time) {}
    double time() const noexcept { return time_; }

private:
    double time_;
};

/// Fixed-point iteration did not converge within its budget.
class IterationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Sub- and super-solution sequences lost their ordering or monotonicity.
class MonotonicityError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A field that must be nondegenerate (nonzero denominator of a ratio) was not.
class DegenerateError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Configuration text could not be parsed.
class ParseError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Violated internal invariant (should be unreachable).
class InternalError : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

} // namespace nsp
