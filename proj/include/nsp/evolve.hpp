#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>
#include <vector>

#include "nsp/domain.hpp"
#include "nsp/elliptic.hpp"
#include "nsp/error.hpp"
#include "nsp/params.hpp"
#include "nsp/steady.hpp"
#include "nsp/tridiag.hpp"

namespace nsp {

/// Term switches for diagnostic runs. `nonlinear = false` integrates the linearization about the
/// steady state.
struct EvolveOptions {
    bool nonlinear = true;
    bool pressure = true;
    bool coupling = true;
    bool viscous = true;
};

struct SpongeParams {
    double width_fraction = 0.2; ///< fraction of the shell covered by the layer
    double rate = -1.0;          ///< damping rate; negative selects c_s(R_max) / width
};

/// Perturbation (q, u, phi) of the steady state at time t. u is the radial velocity component.
struct PerturbationState {
    RadialField q;
    RadialField u;
    RadialField phi;
    double t = 0.0;
};

struct Tendencies {
    RadialField q_t;
    RadialField u_t;
    RadialField phi_t;
    RadialField q_tt;
};

/// Radially symmetric perturbation dynamics about a steady state: continuity, momentum with
/// enthalpy-form pressure, Poisson coupling and longitudinal viscosity (2 mu + lambda).
class PerturbationModel {
public:
    PerturbationModel(const SteadyState& steady, const FluidParams& params, EvolveOptions opt = {},
                      SpongeParams sponge = {})
        : grid_(steady.grid_ptr()), params_(params), opt_(opt), lap_(grid_) {
        params_.validate();
        if (std::abs(params_.gamma - steady.gamma) > 1e-12)
            throw ParameterError("PerturbationModel: gamma differs from the steady state");
        const auto& r = grid_->nodes();
        const std::size_t n = r.size();
        rho_ = steady.rho_tilde.values();
        inv_rho_.resize(n);
        hp_.resize(n);
        h_.resize(n);
        for (std::size_t i = 0; i < n; ++i) {
            inv_rho_[i] = 1.0 / rho_[i];
            hp_[i] = eos::enthalpy_prime(rho_[i], params_.gamma);
            h_[i] = eos::enthalpy(rho_[i], params_.gamma);
        }
        visc_ = opt_.viscous ? params_.longitudinal_viscosity() : 0.0;

        // narrow viscous operator L u = (d_{i+1/2} - d_{i-1/2}) / omega_i
        const auto& om = grid_->dr_weights();
        visc_op_ = Tridiagonal(n);
        for (std::size_t i = 1; i + 1 < n; ++i) {
            const double hp = r[i + 1] - r[i], hm = r[i] - r[i - 1];
            visc_op_.upper[i] = r[i + 1] / (hp * r[i] * om[i]);
            visc_op_.lower[i] = r[i - 1] / (hm * r[i] * om[i]);
            visc_op_.diag[i] = -(r[i] / (hp * r[i + 1]) + r[i] / (hm * r[i - 1])) / om[i];
        }

        if (!(sponge.width_fraction >= 0.0 && sponge.width_fraction < 1.0))
            throw ParameterError("PerturbationModel: sponge width fraction must lie in [0,1)");
        mask_.assign(n, 0.0);
        const double width = sponge.width_fraction * (grid_->r_outer() - grid_->r_inner());
        if (width > 0.0) {
            const double start = grid_->r_outer() - width;
            for (std::size_t i = 0; i < n; ++i) mask_[i] = detail::smooth_step((r[i] - start) / width);
            sponge_rate_ = sponge.rate >= 0.0 ? sponge.rate : eos::sound_speed(rho_.back(), params_.gamma) / width;
        }
        sponge_width_ = width;
    }

    const GridPtr& grid_ptr() const noexcept { return grid_; }
    const RadialGrid& grid() const noexcept { return *grid_; }
    const FluidParams& params() const noexcept { return params_; }
    const EvolveOptions& options() const noexcept { return opt_; }
    const RadialLaplacian& laplacian() const noexcept { return lap_; }
    const std::vector<double>& rho_tilde() const noexcept { return rho_; }
    const std::vector<double>& enthalpy_prime() const noexcept { return hp_; }
    double viscosity() const noexcept { return visc_; }
    double sponge_rate() const noexcept { return sponge_rate_; }
    double sponge_width() const noexcept { return sponge_width_; }
    const std::vector<double>& sponge_mask() const noexcept { return mask_; }

    RadialField solve_potential(const RadialField& q) const {
        if (!opt_.coupling) return RadialField::zeros(grid_);
        return RadialField(grid_, lap_.solve(q.values()));
    }

    PerturbationState make_state(RadialField q, RadialField u, double t = 0.0) const {
        check_density(q, t);
        PerturbationState s;
        s.phi = solve_potential(q);
        s.q = std::move(q);
        s.u = std::move(u);
        s.t = t;
        return s;
    }

    /// Explicit part of the right-hand side: everything except (2 mu + lambda) / rho-tilde * L u.
    void explicit_rhs(const std::vector<double>& q, const std::vector<double>& u, const std::vector<double>& phi,
                      double t, std::vector<double>& dq, std::vector<double>& du) const {
        const auto& r = grid_->nodes();
        const std::size_t n = r.size();
        std::vector<double> flux(n), tmp(n), d(n);
        for (std::size_t i = 0; i < n; ++i) {
            const double rho = opt_.nonlinear ? rho_[i] + q[i] : rho_[i];
            flux[i] = r[i] * r[i] * rho * u[i];
        }
        conservative_derivative_into(*grid_, flux, d);
        dq.assign(n, 0.0);
        for (std::size_t i = 0; i < n; ++i) dq[i] = -d[i] / (r[i] * r[i]);

        du.assign(n, 0.0);
        if (opt_.pressure) {
            for (std::size_t i = 0; i < n; ++i) tmp[i] = opt_.nonlinear ? enthalpy_increment(i, q[i]) : hp_[i] * q[i];
            conservative_derivative_into(*grid_, tmp, d);
            for (std::size_t i = 0; i < n; ++i) du[i] -= d[i];
        }
        if (opt_.coupling) {
            conservative_derivative_into(*grid_, phi, d);
            for (std::size_t i = 0; i < n; ++i) du[i] += d[i];
        }
        if (opt_.nonlinear) {
            conservative_derivative_into(*grid_, u, d);
            for (std::size_t i = 0; i < n; ++i) du[i] -= u[i] * d[i];
            if (visc_ != 0.0) {
                const auto lu = visc_op_.apply(u);
                for (std::size_t i = 0; i < n; ++i) du[i] += visc_ * (1.0 / (rho_[i] + q[i]) - inv_rho_[i]) * lu[i];
            }
        }
        if (sponge_rate_ > 0.0)
            for (std::size_t i = 0; i < n; ++i) du[i] -= sponge_rate_ * mask_[i] * u[i];
        du.front() = 0.0;
        du.back() = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            if (!std::isfinite(dq[i]) || !std::isfinite(du[i]))
                throw NumericalError("non-finite tendency at r = " + std::to_string(r[i]), t);
    }

    /// (2 mu + lambda) / rho-tilde * L u with zero rows at both ends.
    std::vector<double> implicit_rhs(const std::vector<double>& u) const {
        auto lu = visc_op_.apply(u);
        for (std::size_t i = 0; i < lu.size(); ++i) lu[i] *= visc_ * inv_rho_[i];
        lu.front() = 0.0;
        lu.back() = 0.0;
        return lu;
    }

    /// Solves (I - a (2 mu + lambda) / rho-tilde L) u = rhs with u = 0 at both ends.
    std::vector<double> solve_implicit(const std::vector<double>& rhs, double a) const {
        const std::size_t n = rhs.size();
        Tridiagonal m(n);
        for (std::size_t i = 0; i < n; ++i) {
            const double c = a * visc_ * inv_rho_[i];
            m.lower[i] = -c * visc_op_.lower[i];
            m.diag[i] = 1.0 - c * visc_op_.diag[i];
            m.upper[i] = -c * visc_op_.upper[i];
        }
        m.lower[0] = m.upper[0] = 0.0;
        m.diag[0] = 1.0;
        m.lower[n - 1] = m.upper[n - 1] = 0.0;
        m.diag[n - 1] = 1.0;
        std::vector<double> b(rhs.begin(), rhs.end());
        b.front() = 0.0;
        b.back() = 0.0;
        return solve_tridiagonal(m, b);
    }

    /// q_t, u_t, phi_t and q_tt of the semi-discrete system at `s`.
    Tendencies tendencies(const PerturbationState& s) const {
        const std::size_t n = grid_->size();
        std::vector<double> dq, du;
        explicit_rhs(s.q.values(), s.u.values(), s.phi.values(), s.t, dq, du);
        const auto iu = implicit_rhs(s.u.values());
        for (std::size_t i = 0; i < n; ++i) du[i] += iu[i];
        const auto& r = grid_->nodes();
        std::vector<double> flux(n), d(n);
        for (std::size_t i = 0; i < n; ++i) {
            const double v = opt_.nonlinear ? dq[i] * s.u[i] + (rho_[i] + s.q[i]) * du[i] : rho_[i] * du[i];
            flux[i] = r[i] * r[i] * v;
        }
        conservative_derivative_into(*grid_, flux, d);
        std::vector<double> qtt(n);
        for (std::size_t i = 0; i < n; ++i) qtt[i] = -d[i] / (r[i] * r[i]);
        Tendencies t;
        t.q_t = RadialField(grid_, std::move(dq));
        t.phi_t = solve_potential(t.q_t);
        t.u_t = RadialField(grid_, std::move(du));
        t.q_tt = RadialField(grid_, std::move(qtt));
        return t;
    }

    /// min over nodes of h / (|u| + c_s); c_s is dropped when pressure is disabled.
    double cfl_limit(const PerturbationState& s) const {
        const auto& r = grid_->nodes();
        double lim = std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i + 1 < r.size(); ++i) {
            const double h = r[i + 1] - r[i];
            double speed = std::max(std::abs(s.u[i]), std::abs(s.u[i + 1]));
            if (opt_.pressure) {
                // c_s is nondecreasing in rho for gamma >= 1
                const double rho = std::max(rho_[i] + s.q[i], rho_[i + 1] + s.q[i + 1]);
                speed += eos::sound_speed(rho, params_.gamma);
            }
            if (speed > 0.0) lim = std::min(lim, h / speed);
        }
        return lim;
    }

    /// Discrete ||div u||^2 = 4 pi sum_f dr_f r_i r_{i+1} d_f^2, which equals ||grad u||^2 for radial
    /// fields vanishing at both ends and is exactly the dissipation of the viscous operator.
    double viscous_dissipation_norm2(const std::vector<double>& u) const {
        const auto& r = grid_->nodes();
        double s = 0.0;
        for (std::size_t i = 0; i + 1 < r.size(); ++i) {
            const double h = r[i + 1] - r[i];
            const double d = (r[i + 1] * r[i + 1] * u[i + 1] - r[i] * r[i] * u[i]) / (h * r[i] * r[i + 1]);
            s += h * r[i] * r[i + 1] * d * d;
        }
        return 4.0 * std::numbers::pi * s;
    }

    /// Energy removed by the sponge per unit time: sum w rho-tilde sigma s u^2.
    double sponge_work(const std::vector<double>& u) const {
        if (sponge_rate_ <= 0.0) return 0.0;
        const auto& w = grid_->weights();
        double s = 0.0;
        for (std::size_t i = 0; i < u.size(); ++i) s += w[i] * rho_[i] * mask_[i] * u[i] * u[i];
        return sponge_rate_ * s;
    }

    void check_density(const RadialField& q, double t) const {
        double m = std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < q.size(); ++i) m = std::min(m, rho_[i] + q[i]);
        if (m < 0.1 * params_.c_star)
            throw VacuumError("density fell below 0.1 c* (min rho = " + std::to_string(m) + ")", t);
    }

    double min_density(const RadialField& q) const {
        double m = std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < q.size(); ++i) m = std::min(m, rho_[i] + q[i]);
        return m;
    }

private:
    /// h(rho-tilde + q) - h(rho-tilde) without cancellation.
    double enthalpy_increment(std::size_t i, double q) const {
        const double x = q * inv_rho_[i];
        if (params_.gamma == 1.0) return std::log1p(x);
        const double g1 = params_.gamma - 1.0;
        return h_[i] * std::expm1(g1 * std::log1p(x));
    }

    GridPtr grid_;
    FluidParams params_;
    EvolveOptions opt_;
    RadialLaplacian lap_;
    std::vector<double> rho_, inv_rho_, hp_, h_;
    double visc_ = 0.0;
    Tridiagonal visc_op_;
    std::vector<double> mask_;
    double sponge_rate_ = 0.0;
    double sponge_width_ = 0.0;
};

/// One step of the IMEX ARS(2,2,2) scheme: L-stable SDIRK for the viscous term, explicit
/// two-stage part for transport, pressure, coupling and the sponge. Poisson is re-solved per stage.
inline PerturbationState step_imex(const PerturbationState& s, double dt, const PerturbationModel& m) {
    if (!(dt >= 0.0) || !std::isfinite(dt)) throw ParameterError("step_imex: dt must be finite and >= 0");
    if (dt == 0.0) return s;
    if (m.options().pressure && dt > 0.5 * m.cfl_limit(s))
        throw NumericalError("step_imex: dt violates the acoustic CFL bound", s.t);
    const double g = 1.0 - 1.0 / std::numbers::sqrt2;
    const double dl = 1.0 - 1.0 / (2.0 * g);
    const std::size_t n = s.q.size();
    const auto& q0 = s.q.values();
    const auto& u0 = s.u.values();

    std::vector<double> eq1, eu1;
    m.explicit_rhs(q0, u0, s.phi.values(), s.t, eq1, eu1);

    std::vector<double> q2(n), rhs(n);
    for (std::size_t i = 0; i < n; ++i) {
        q2[i] = q0[i] + dt * g * eq1[i];
        rhs[i] = u0[i] + dt * g * eu1[i];
    }
    auto u2 = m.solve_implicit(rhs, dt * g);
    RadialField q2f(s.q.grid_ptr(), q2);
    m.check_density(q2f, s.t + g * dt);
    auto phi2 = m.solve_potential(q2f);
    std::vector<double> eq2, eu2;
    m.explicit_rhs(q2, u2, phi2.values(), s.t + g * dt, eq2, eu2);
    const auto iu2 = m.implicit_rhs(u2);

    std::vector<double> q3(n);
    for (std::size_t i = 0; i < n; ++i) {
        q3[i] = q0[i] + dt * (dl * eq1[i] + (1.0 - dl) * eq2[i]);
        rhs[i] = u0[i] + dt * (dl * eu1[i] + (1.0 - dl) * eu2[i] + (1.0 - g) * iu2[i]);
    }
    auto u3 = m.solve_implicit(rhs, dt * g);
    PerturbationState out;
    out.t = s.t + dt;
    out.q = RadialField(s.q.grid_ptr(), std::move(q3));
    out.u = RadialField(s.u.grid_ptr(), std::move(u3));
    m.check_density(out.q, out.t);
    out.phi = m.solve_potential(out.q);
    return out;
}

/// Automatic step: 0.4 times the acoustic limit min h / (|u| + c_s).
inline double auto_time_step(const PerturbationState& s, const PerturbationModel& m, double t_end) {
    const double lim = m.cfl_limit(s);
    if (!std::isfinite(lim)) return t_end / 100.0;
    return 0.4 * lim;
}

enum class InitKind { compensated, density_only, velocity_only };

inline const char* to_string(InitKind k) {
    switch (k) {
    case InitKind::compensated: return "compensated";
    case InitKind::density_only: return "density_only";
    case InitKind::velocity_only: return "velocity_only";
    }
    return "?";
}

namespace detail {

/// C-infinity bump exp(-1/(1-x^2)) on |r - c| < w, normalized to 1 at the center.
inline double compact_bump(double r, double c, double w) {
    const double x = (r - c) / w;
    if (std::abs(x) >= 1.0) return 0.0;
    return std::exp(1.0 - 1.0 / (1.0 - x * x));
}

} // namespace detail

/// Unit-amplitude shapes of the initial perturbation: a positive density bump with a matched
/// negative shell of exactly zero discrete mass, and an outgoing velocity bump vanishing near R.
struct InitialShape {
    RadialField q;
    RadialField u;
};

inline InitialShape initial_shape(InitKind kind, const PerturbationModel& m) {
    const auto& g = m.grid_ptr();
    const double R = g->r_inner(), Rmax = g->r_outer();
    const double span = std::min(Rmax - R, 10.0 * R);
    const double c1 = R + 0.2 * span, c2 = R + 0.45 * span, w = 0.15 * span;
    InitialShape s;
    s.q = RadialField::zeros(g);
    s.u = RadialField::zeros(g);
    if (kind != InitKind::velocity_only) {
        auto pos = RadialField::from_function(g, [&](double r) { return detail::compact_bump(r, c1, w); });
        auto neg = RadialField::from_function(g, [&](double r) { return detail::compact_bump(r, c2, w); });
        const double ratio = integrate(pos) / integrate(neg);
        std::vector<double> v(g->size());
        for (std::size_t i = 0; i < v.size(); ++i) v[i] = pos[i] - ratio * neg[i];
        // remove the last roundoff in the discrete mass on the largest-weight node of the shell
        const auto& wts = g->weights();
        double mass = 0.0;
        for (std::size_t i = 0; i < v.size(); ++i) mass += wts[i] * v[i];
        std::size_t k = 0;
        for (std::size_t i = 0; i < v.size(); ++i)
            if (neg[i] * wts[i] > neg[k] * wts[k]) k = i;
        v[k] -= mass / wts[k];
        s.q = RadialField(g, std::move(v));
    }
    if (kind != InitKind::density_only) {
        const auto& rho = m.rho_tilde();
        std::vector<double> v(g->size());
        for (std::size_t i = 0; i < v.size(); ++i) {
            const double r = g->r(i);
            const double cs = eos::sound_speed(rho[i], m.params().gamma);
            v[i] = cs / rho[i] * detail::compact_bump(r, c1, w);
        }
        s.u = RadialField(g, std::move(v));
    }
    return s;
}

} // namespace nsp
