#pragma once

#include <stdexcept>
#include <string>

namespace mvsim {

/// Base of every error the toolkit throws.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Inputs of inconsistent dimension, invalid ranges, mismatched grids.
class ArgumentError : public Error {
public:
    using Error::Error;
};

/// A coefficient, functional or matrix produced a non-finite value.
class NumericError : public Error {
public:
    using Error::Error;
};

/// A particle state left the finite range during time stepping.
class SimulationError : public Error {
public:
    SimulationError(const std::string& what, std::size_t step, std::size_t particle)
        : Error(what), step_(step), particle_(particle) {}
    std::size_t step() const noexcept { return step_; }
    std::size_t particle() const noexcept { return particle_; }

private:
    std::size_t step_;
    std::size_t particle_;
};

/// A matrix that must be solved against is singular to working precision.
class ConditioningError : public Error {
public:
    ConditioningError(const std::string& what, double condition)
        : Error(what), condition_(condition) {}
    double condition() const noexcept { return condition_; }

private:
    double condition_;
};

/// Fixed time step violates the explicit scheme's CFL restriction.
class StabilityError : public Error {
public:
    using Error::Error;
};

/// Mass bookkeeping of the Fokker-Planck solver drifted.
class ConservationError : public Error {
public:
    using Error::Error;
};

/// Fokker-Planck density undershot the positivity floor.
class PositivityError : public Error {
public:
    using Error::Error;
};

/// Invalid experiment configuration. The message names the offending field path.
class ConfigError : public Error {
public:
    ConfigError(const std::string& field, const std::string& what)
        : Error(field + ": " + what), field_(field) {}
    const std::string& field() const noexcept { return field_; }

private:
    std::string field_;
};

class IoError : public Error {
public:
    using Error::Error;
};

}  // namespace mvsim
