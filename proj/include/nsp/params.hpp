#pragma once

#include <cmath>
#include <string>

#include "nsp/error.hpp"

namespace nsp {

/// Physical constants of the Navier-Stokes-Poisson system with pressure p(rho) = rho^gamma.
struct FluidParams {
    double gamma = 2.0;   ///< adiabatic exponent, >= 1
    double mu = 1.0;      ///< shear viscosity, > 0
    double lambda_ = 0.0; ///< second viscosity, lambda + 2/3 mu >= 0
    double alpha = 1.0;   ///< Navier-slip friction (inert in the radial reduction)
    double c_star = 1.0;  ///< far-field density, > 0

    void validate() const {
        auto finite = [](double v, const char* name) {
            if (!std::isfinite(v)) throw ParameterError(std::string("FluidParams: ") + name + " is not finite");
        };
        finite(gamma, "gamma");
        finite(mu, "mu");
        finite(lambda_, "lambda");
        finite(alpha, "alpha");
        finite(c_star, "c_star");
        if (gamma < 1.0) throw ParameterError("FluidParams: gamma must be >= 1");
        if (!(mu > 0.0)) throw ParameterError("FluidParams: mu must be > 0");
        if (lambda_ + 2.0 * mu / 3.0 < 0.0) throw ParameterError("FluidParams: lambda + 2/3 mu must be >= 0");
        if (!(c_star > 0.0)) throw ParameterError("FluidParams: c_star must be > 0");
    }

    /// Coefficient of grad div u in the radial reduction of the momentum equation.
    double longitudinal_viscosity() const noexcept { return 2.0 * mu + lambda_; }
};

/// Pressure law helpers, p(rho) = rho^gamma.
namespace eos {

inline double pressure(double rho, double gamma) { return std::pow(rho, gamma); }

/// Enthalpy h with h'(s) = p'(s)/s.
inline double enthalpy(double rho, double gamma) {
    if (gamma == 1.0) return std::log(rho);
    return gamma / (gamma - 1.0) * std::pow(rho, gamma - 1.0);
}

/// h'(rho) = gamma rho^(gamma-2).
inline double enthalpy_prime(double rho, double gamma) { return gamma * std::pow(rho, gamma - 2.0); }

inline double sound_speed(double rho, double gamma) { return std::sqrt(gamma * std::pow(rho, gamma - 1.0)); }

} // namespace eos

} // namespace nsp
