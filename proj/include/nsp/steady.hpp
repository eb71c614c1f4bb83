#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "nsp/domain.hpp"
#include "nsp/elliptic.hpp"
#include "nsp/error.hpp"
#include "nsp/params.hpp"

namespace nsp {

enum class ProfileKind { constant, admissible_bump, general_gamma_envelope };

inline const char* to_string(ProfileKind k) {
    switch (k) {
    case ProfileKind::constant: return "constant";
    case ProfileKind::admissible_bump: return "admissible_bump";
    case ProfileKind::general_gamma_envelope: return "general_gamma_envelope";
    }
    return "?";
}

/// Parameters (c0, eps) of the power-law supersolution c0 r^-eps for general gamma > 1.
struct EnvelopeParams {
    double c0 = 1.0;
    double eps = 0.5;
};

namespace detail {

inline double smooth_psi(double t) { return t > 0.0 ? std::exp(-1.0 / t) : 0.0; }

/// C-infinity step: 0 for t <= 0, 1 for t >= 1.
inline double smooth_step(double t) {
    if (t <= 0.0) return 0.0;
    if (t >= 1.0) return 1.0;
    const double a = smooth_psi(t), b = smooth_psi(1.0 - t);
    return a / (a + b);
}

} // namespace detail

/// Cutoff s(r) in [0,1]: equal to 1 at R, smoothly 0 beyond R + L with L = min(5R, (R_max - R)/2).
inline double profile_taper(double r, double r_inner, double r_outer) {
    const double len = std::min(5.0 * r_inner, 0.5 * (r_outer - r_inner));
    return 1.0 - detail::smooth_step((r - r_inner) / len);
}

/// Branch nonlinearity F with rho = F(Phi): gamma > 1 uses the enthalpy inversion,
/// gamma = 1 the Boltzmann relation. Normalized so that F(0) = c*.
class Nonlinearity {
public:
    Nonlinearity(double gamma, double c_star) : gamma_(gamma), c_star_(c_star) {
        if (!(gamma >= 1.0)) throw ParameterError("Nonlinearity: gamma must be >= 1");
        if (!(c_star > 0.0)) throw ParameterError("Nonlinearity: c_star must be > 0");
        if (gamma_ > 1.0) {
            c1_ = gamma_ / (gamma_ - 1.0) * std::pow(c_star_, gamma_ - 1.0);
            prefactor_ = std::pow((gamma_ - 1.0) / gamma_, 1.0 / (gamma_ - 1.0));
        }
    }

    double gamma() const noexcept { return gamma_; }
    double c_star() const noexcept { return c_star_; }
    /// c1 = gamma/(gamma-1) c*^(gamma-1); zero on the isothermal branch.
    double c1() const noexcept { return c1_; }

    double value(double phi) const {
        if (gamma_ == 1.0) return c_star_ * std::exp(phi);
        const double base = phi + c1_;
        if (!(base > 0.0)) throw DomainError("Nonlinearity: Phi + c1 must be > 0");
        return prefactor_ * std::pow(base, 1.0 / (gamma_ - 1.0));
    }

    double derivative(double phi) const {
        if (gamma_ == 1.0) return c_star_ * std::exp(phi);
        const double base = phi + c1_;
        if (!(base > 0.0)) throw DomainError("Nonlinearity: Phi + c1 must be > 0");
        const double e = 1.0 / (gamma_ - 1.0);
        return prefactor_ * e * std::pow(base, e - 1.0);
    }

private:
    double gamma_;
    double c_star_;
    double c1_ = 0.0;
    double prefactor_ = 1.0;
};

struct BackgroundProfile {
    ProfileKind kind = ProfileKind::constant;
    double c_star = 1.0;
    double amplitude = 0.0;
    double gamma = 2.0;
    EnvelopeParams envelope;
    RadialField values;

    const GridPtr& grid_ptr() const noexcept { return values.grid_ptr(); }

    /// Pointwise upper bound on rho-tilde implied by the profile class.
    double upper_bound(double r) const {
        if (kind == ProfileKind::general_gamma_envelope) {
            Nonlinearity F(gamma, c_star);
            return F.value(envelope.c0 * std::pow(r, -envelope.eps));
        }
        return c_star + 1.0 / r;
    }
};

/// Builds the doping profile b. `gamma` and `env` matter only for the envelope kind.
inline BackgroundProfile make_profile(ProfileKind kind, double c_star, double amplitude, GridPtr grid,
                                      double gamma = 2.0, EnvelopeParams env = {}) {
    if (!(c_star > 0.0) || !std::isfinite(c_star)) throw ParameterError("make_profile: c_star must be > 0");
    if (!(amplitude >= 0.0 && amplitude <= 1.0)) throw ParameterError("make_profile: amplitude must lie in [0,1]");
    BackgroundProfile p;
    p.kind = kind;
    p.c_star = c_star;
    p.amplitude = amplitude;
    p.gamma = gamma;
    p.envelope = env;
    const double R = grid->r_inner(), Rmax = grid->r_outer();
    switch (kind) {
    case ProfileKind::constant:
        p.values = RadialField::constant(grid, c_star);
        break;
    case ProfileKind::admissible_bump:
        p.values = RadialField::from_function(
            grid, [&](double r) { return c_star + amplitude * profile_taper(r, R, Rmax) / r; });
        break;
    case ProfileKind::general_gamma_envelope: {
        if (!(gamma > 1.0)) throw ParameterError("make_profile: envelope profile needs gamma > 1");
        if (!(env.c0 > 0.0) || !(env.eps > 0.0 && env.eps < 1.0))
            throw ParameterError("make_profile: envelope needs c0 > 0 and 0 < eps < 1");
        Nonlinearity F(gamma, c_star);
        p.values = RadialField::from_function(grid, [&](double r) {
            return F.value(amplitude * profile_taper(r, R, Rmax) * env.c0 * std::pow(r, -env.eps));
        });
        break;
    }
    }
    return p;
}

/// The extremal admissible profile b = c* + 1/r without cutoff, the equality case of the
/// explicit supersolution.
inline BackgroundProfile make_saturated_profile(double c_star, GridPtr grid) {
    auto p = make_profile(ProfileKind::admissible_bump, c_star, 1.0, grid);
    p.values = RadialField::from_function(grid, [&](double r) { return c_star + 1.0 / r; });
    return p;
}

inline RadialField subsolution_phi(double gamma, GridPtr grid) {
    if (!(gamma >= 1.0)) throw ParameterError("subsolution_phi: gamma must be >= 1");
    return RadialField::zeros(std::move(grid));
}

/// Explicit supersolution: (gamma/(gamma-1))(c* + 1/r)^(gamma-1) - c1 for gamma > 1,
/// ln(1 + 1/(c* r)) for gamma = 1.
inline RadialField supersolution_phi(double gamma, double c_star, GridPtr grid) {
    if (!(gamma >= 1.0)) throw ParameterError("supersolution_phi: gamma must be >= 1");
    if (!(c_star > 0.0)) throw ParameterError("supersolution_phi: c_star must be > 0");
    if (gamma == 1.0)
        return RadialField::from_function(grid, [&](double r) { return std::log1p(1.0 / (c_star * r)); });
    const double k = gamma / (gamma - 1.0);
    const double c1 = k * std::pow(c_star, gamma - 1.0);
    return RadialField::from_function(grid, [&](double r) { return k * std::pow(c_star + 1.0 / r, gamma - 1.0) - c1; });
}

/// Power-law supersolution c0 r^-eps for the general-gamma envelope.
inline RadialField envelope_supersolution_phi(const EnvelopeParams& env, GridPtr grid) {
    return RadialField::from_function(grid, [&](double r) { return env.c0 * std::pow(r, -env.eps); });
}

inline RadialField rho_from_phi(const RadialField& phi, double gamma, double c_star) {
    Nonlinearity F(gamma, c_star);
    return phi.map([&](double, double v) { return F.value(v); });
}

enum class Role { sub, super };

inline const char* to_string(Role r) { return r == Role::sub ? "sub" : "super"; }

struct CertReport {
    Role role = Role::super;
    double max_residual = 0.0;      ///< max over interior nodes of Delta_h Phi - F(Phi) + b
    double min_residual = 0.0;      ///< min over interior nodes
    double normal_derivative = 0.0; ///< dPhi/dn at R with n pointing to the origin
    bool residual_ok = false;
    bool boundary_ok = false;
    bool pass = false;
};

/// Sign certificate of a candidate sub- or supersolution on interior nodes.
inline CertReport check_subsuper(const RadialField& phi, Role role, double gamma, const BackgroundProfile& profile,
                                 double tol = 1e-8) {
    Nonlinearity F(gamma, profile.c_star);
    RadialLaplacian lap(phi.grid_ptr());
    const auto lp = lap.apply(phi.values());
    const std::size_t n = phi.size();
    CertReport c;
    c.role = role;
    c.max_residual = -INFINITY;
    c.min_residual = INFINITY;
    for (std::size_t i = 1; i + 1 < n; ++i) {
        const double res = lp[i] - F.value(phi[i]) + profile.values[i];
        c.max_residual = std::max(c.max_residual, res);
        c.min_residual = std::min(c.min_residual, res);
    }
    c.normal_derivative = -radial_derivative(phi.grid(), phi.values(), 1)[0];
    if (role == Role::super) {
        c.residual_ok = c.max_residual <= tol;
        c.boundary_ok = c.normal_derivative >= -tol;
    } else {
        c.residual_ok = c.min_residual >= -tol;
        c.boundary_ok = c.normal_derivative <= tol;
    }
    c.pass = c.residual_ok && c.boundary_ok;
    return c;
}

struct SteadyOptions {
    double tol = 1e-10;       ///< max-norm increment for convergence
    double agree_tol = 1e-9;  ///< allowed gap between the sub- and super-start limits
    int max_iter = 200;
    double shift_factor = 1.1;
    double bounds_tol = 1e-8;
    /// Called after every iteration with (k, super-start iterate, sub-start iterate).
    std::function<void(int, const RadialField&, const RadialField&)> observer;
};

struct SteadyState {
    RadialField rho_tilde;
    RadialField phi_tilde;
    BackgroundProfile profile;
    double gamma = 2.0;
    double c_star = 1.0;
    double residual_elliptic = 0.0;  ///< ||Delta_h Phi - (rho - b)||_{L^2}
    double truncation_residual = 0.0; ///< same residual with a fourth-order Laplacian, interior nodes
    bool bounds_ok = false;
    double min_rho_margin = 0.0; ///< min of rho - c*
    double max_rho_excess = 0.0; ///< max of rho - upper bound
    int iterations_super = 0;
    int iterations_sub = 0;
    double limit_gap = 0.0;
    double shift = 0.0;
    CertReport cert_super;
    CertReport cert_sub;

    const GridPtr& grid_ptr() const noexcept { return phi_tilde.grid_ptr(); }
    const RadialGrid& grid() const noexcept { return phi_tilde.grid(); }
};

/// ||Delta_4 Phi - F(Phi) + b|| over nodes 2..N-2, with Delta_4 built from five-point
/// fourth-order stencils. Measures how well the discrete solution satisfies the continuum equation.
inline double truncation_residual(const RadialField& phi, const Nonlinearity& F, const RadialField& b) {
    const auto& g = phi.grid();
    const auto& r = g.nodes();
    const std::size_t n = r.size();
    double s = 0.0;
    for (std::size_t i = 2; i + 2 < n; ++i) {
        std::span<const double> x(r.data() + i - 2, 5);
        const auto w1 = detail::fornberg_weights(r[i], x, 1);
        const auto w2 = detail::fornberg_weights(r[i], x, 2);
        double d1 = 0.0, d2 = 0.0;
        for (int k = 0; k < 5; ++k) {
            d1 += w1[k] * phi[i - 2 + k];
            d2 += w2[k] * phi[i - 2 + k];
        }
        const double res = d2 + 2.0 / r[i] * d1 - F.value(phi[i]) + b[i];
        s += g.weights()[i] * res * res;
    }
    return std::sqrt(s);
}

namespace detail {

inline double max_diff(const std::vector<double>& a, const std::vector<double>& b) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

} // namespace detail

/// Monotone iteration (Delta - M) Phi_{k+1} = F(Phi_k) - b - M Phi_k started from both the
/// supersolution and the zero subsolution.
inline SteadyState solve_steady_monotone(double gamma, const BackgroundProfile& profile,
                                         const SteadyOptions& opt = {}) {
    if (!(gamma >= 1.0)) throw ParameterError("solve_steady_monotone: gamma must be >= 1");
    if (!(opt.tol > 0.0) || opt.max_iter < 1) throw ParameterError("solve_steady_monotone: bad options");
    const GridPtr& grid = profile.grid_ptr();
    const bool envelope = profile.kind == ProfileKind::general_gamma_envelope;
    if (!envelope && gamma > 2.0)
        throw ParameterError("solve_steady_monotone: gamma > 2 requires the general_gamma_envelope profile");
    if (envelope && gamma == 1.0) throw ParameterError("solve_steady_monotone: envelope profile needs gamma > 1");

    Nonlinearity F(gamma, profile.c_star);
    RadialField super = envelope ? envelope_supersolution_phi(profile.envelope, grid)
                                 : supersolution_phi(gamma, profile.c_star, grid);
    RadialField sub = subsolution_phi(gamma, grid);
    const double phi_max = super.max_abs();
    const double M = opt.shift_factor * std::max(F.derivative(0.0), F.derivative(phi_max));

    RadialLaplacian lap(grid);
    const std::size_t n = grid->size();
    const auto& b = profile.values;
    auto step = [&](const std::vector<double>& phi) {
        std::vector<double> rhs(n);
        for (std::size_t i = 0; i < n; ++i) rhs[i] = F.value(phi[i]) - b[i] - M * phi[i];
        return lap.solve(rhs, M);
    };

    std::vector<double> hi = super.values(), lo = sub.values();
    const double slack = 1e-13 * (1.0 + phi_max);
    int it_hi = 0, it_lo = 0;
    bool done_hi = false, done_lo = false;
    auto midpoint_residual = [&] {
        std::vector<double> mid(n);
        for (std::size_t i = 0; i < n; ++i) mid[i] = 0.5 * (hi[i] + lo[i]);
        auto lp = lap.apply(mid);
        for (std::size_t i = 0; i < n; ++i) lp[i] -= F.value(mid[i]) - b[i];
        return weighted_l2_norm(lp, *grid);
    };
    bool converged = false;
    for (int k = 0; k < opt.max_iter && !converged; ++k) {
        if (!done_hi) {
            auto next = step(hi);
            for (std::size_t i = 0; i < n; ++i)
                if (next[i] > hi[i] + slack)
                    throw MonotonicityError("solve_steady_monotone: super-start sequence increased at r = " +
                                            std::to_string(grid->r(i)));
            const double inc = detail::max_diff(next, hi);
            hi = std::move(next);
            ++it_hi;
            done_hi = inc < opt.tol;
        }
        if (!done_lo) {
            auto next = step(lo);
            for (std::size_t i = 0; i < n; ++i)
                if (next[i] < lo[i] - slack)
                    throw MonotonicityError("solve_steady_monotone: sub-start sequence decreased at r = " +
                                            std::to_string(grid->r(i)));
            const double inc = detail::max_diff(next, lo);
            lo = std::move(next);
            ++it_lo;
            done_lo = inc < opt.tol;
        }
        for (std::size_t i = 0; i < n; ++i)
            if (lo[i] > hi[i] + slack)
                throw MonotonicityError("solve_steady_monotone: sequences crossed at r = " + std::to_string(grid->r(i)));
        if (opt.observer) opt.observer(k + 1, RadialField(grid, hi), RadialField(grid, lo));
        if (done_hi && done_lo) {
            converged = detail::max_diff(hi, lo) <= opt.agree_tol && midpoint_residual() <= opt.tol;
            if (converged) break;
            // increments small but limits apart or residual above tol: keep iterating both
            done_hi = done_lo = false;
        }
    }
    if (!converged)
        throw IterationError("solve_steady_monotone: no convergence within " + std::to_string(opt.max_iter) +
                             " iterations");

    SteadyState s;
    s.gamma = gamma;
    s.c_star = profile.c_star;
    s.profile = profile;
    s.iterations_super = it_hi;
    s.iterations_sub = it_lo;
    s.limit_gap = detail::max_diff(hi, lo);
    s.shift = M;
    std::vector<double> mid(n);
    for (std::size_t i = 0; i < n; ++i) mid[i] = 0.5 * (hi[i] + lo[i]);
    s.phi_tilde = RadialField(grid, std::move(mid));
    s.rho_tilde = rho_from_phi(s.phi_tilde, gamma, profile.c_star);

    auto lp = lap.apply(s.phi_tilde.values());
    for (std::size_t i = 0; i < n; ++i) lp[i] -= s.rho_tilde[i] - b[i];
    s.residual_elliptic = weighted_l2_norm(lp, *grid);
    s.truncation_residual = truncation_residual(s.phi_tilde, F, b);

    s.min_rho_margin = INFINITY;
    s.max_rho_excess = -INFINITY;
    for (std::size_t i = 0; i < n; ++i) {
        s.min_rho_margin = std::min(s.min_rho_margin, s.rho_tilde[i] - profile.c_star);
        s.max_rho_excess = std::max(s.max_rho_excess, s.rho_tilde[i] - profile.upper_bound(grid->r(i)));
    }
    s.bounds_ok = s.min_rho_margin >= -opt.bounds_tol && s.max_rho_excess <= opt.bounds_tol;
    s.cert_super = check_subsuper(super, Role::super, gamma, profile);
    s.cert_sub = check_subsuper(sub, Role::sub, gamma, profile);
    return s;
}

/// A steady problem in terms of its defining parameters, so that it can be rebuilt on other grids.
struct SteadyProblem {
    double gamma = 2.0;
    double c_star = 1.0;
    ProfileKind kind = ProfileKind::admissible_bump;
    double amplitude = 0.5;
    EnvelopeParams envelope;
    double r_inner = 1.0;
    double r_outer = 16.0;
    std::size_t n_cells = 2000;
    double stretch = 0.0;

    GridPtr grid() const { return build_radial_grid(r_inner, r_outer, n_cells, stretch); }
    BackgroundProfile profile(GridPtr g) const { return make_profile(kind, c_star, amplitude, std::move(g), gamma, envelope); }
    SteadyState solve(const SteadyOptions& opt = {}) const { return solve_steady_monotone(gamma, profile(grid()), opt); }
};

struct RegularityNorms {
    std::array<double, 3> grad_rho{}; ///< ||grad^k rho||, k = 1..3
    std::array<double, 3> grad_phi{}; ///< ||grad^k Phi||, k = 1..3
    double compatibility_residual = 0.0; ///< ||Phi' - gamma rho^(gamma-2) rho'||
};

inline RegularityNorms regularity_norms(const SteadyState& s) {
    RegularityNorms out;
    for (int k = 1; k <= 3; ++k) {
        out.grad_rho[k - 1] = scalar_tensor_gradient_norm(s.rho_tilde, k);
        out.grad_phi[k - 1] = scalar_tensor_gradient_norm(s.phi_tilde, k);
    }
    const auto& g = s.grid();
    const auto dphi = radial_derivative(g, s.phi_tilde.values(), 1);
    const auto drho = radial_derivative(g, s.rho_tilde.values(), 1);
    std::vector<double> res(g.size());
    for (std::size_t i = 0; i < res.size(); ++i)
        res[i] = dphi[i] - eos::enthalpy_prime(s.rho_tilde[i], s.gamma) * drho[i];
    out.compatibility_residual = weighted_l2_norm(res, g);
    return out;
}

struct RegularityReport {
    RegularityNorms base;
    RegularityNorms refined;  ///< twice the cells
    RegularityNorms extended; ///< R_max doubled at the same spacing
    double max_ratio = 1.0;   ///< worst ratio between base and a variant norm, >= 1
    bool bounded = false;
};

/// Discrete derivative norms of the steady pair, re-evaluated under one refinement and one
/// R_max doubling. Norms below `floor` are treated as zero.
inline RegularityReport steady_regularity_report(const SteadyProblem& p, const SteadyOptions& opt = {},
                                                 double floor = 1e-8) {
    RegularityReport rep;
    rep.base = regularity_norms(p.solve(opt));
    SteadyProblem fine = p;
    fine.n_cells = 2 * p.n_cells;
    rep.refined = regularity_norms(fine.solve(opt));
    SteadyProblem wide = p;
    wide.r_outer = 2.0 * p.r_outer;
    wide.n_cells = static_cast<std::size_t>(std::llround(static_cast<double>(p.n_cells) * (wide.r_outer - p.r_inner) /
                                                         (p.r_outer - p.r_inner)));
    rep.extended = regularity_norms(wide.solve(opt));
    double worst = 1.0;
    auto cmp = [&](double a, double b) {
        if (a < floor && b < floor) return;
        const double lo = std::min(a, b), hi = std::max(a, b);
        worst = std::max(worst, lo > 0.0 ? hi / lo : INFINITY);
    };
    for (int k = 0; k < 3; ++k) {
        for (const auto* v : {&rep.refined, &rep.extended}) {
            cmp(rep.base.grad_rho[k], v->grad_rho[k]);
            cmp(rep.base.grad_phi[k], v->grad_phi[k]);
        }
    }
    rep.max_ratio = worst;
    rep.bounded = worst <= 2.0;
    return rep;
}

} // namespace nsp
