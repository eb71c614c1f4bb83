#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "nsp/domain.hpp"
#include "nsp/elliptic.hpp"
#include "nsp/error.hpp"
#include "nsp/evolve.hpp"

namespace nsp {

/// The five summands of E(t).
struct EnergyComponents {
    double u_h3 = 0.0;       ///< ||u||_{H^3}, vector norm
    double q_h2 = 0.0;       ///< ||q||_{H^2}
    double tend_h1 = 0.0;    ///< ||(q_t, u_t)||_{H^1}
    double grad_phi = 0.0;   ///< ||grad phi||
    double grad_phi_t = 0.0; ///< ||grad phi_t||

    double total() const noexcept { return u_h3 + q_h2 + tend_h1 + grad_phi + grad_phi_t; }
};

/// The five summands of D(t).
struct DissipationComponents {
    double grad_u_h2 = 0.0;  ///< ||grad u||_{H^2}
    double grad_ut_h1 = 0.0; ///< ||grad u_t||_{H^1}
    double q_h2 = 0.0;       ///< ||q||_{H^2}
    double qt_h1 = 0.0;      ///< ||q_t||_{H^1}
    double qtt = 0.0;        ///< ||q_tt||_{L^2}

    double D() const noexcept { return D_no_qtt() + qtt; }
    double D_no_qtt() const noexcept { return grad_u_h2 + grad_ut_h1 + q_h2 + qt_h1; }
};

namespace detail {

/// sqrt(sum_{k=lo..hi} ||grad^k u||^2) for a radial vector field.
inline double vector_gradient_range(const RadialField& u, int lo, int hi) {
    double s = 0.0;
    for (int k = lo; k <= hi; ++k) s += integrate_density(u.grid(), vector_gradient_density(u.grid(), u.values(), k));
    return std::sqrt(s);
}

} // namespace detail

inline EnergyComponents energy_components(const PerturbationState& s, const Tendencies& t) {
    EnergyComponents c;
    c.u_h3 = sobolev_norm(s.u, 3, FieldKind::vector);
    c.q_h2 = sobolev_norm(s.q, 2);
    const double a = sobolev_norm(t.q_t, 1), b = sobolev_norm(t.u_t, 1, FieldKind::vector);
    c.tend_h1 = std::sqrt(a * a + b * b);
    c.grad_phi = std::sqrt(dirichlet_energy(s.phi.grid(), s.phi.values()));
    c.grad_phi_t = std::sqrt(dirichlet_energy(t.phi_t.grid(), t.phi_t.values()));
    return c;
}

/// E = ||u||_{H^3} + ||q||_{H^2} + ||(q_t,u_t)||_{H^1} + ||grad phi|| + ||grad phi_t||.
inline double energy_E(const PerturbationState& s, const Tendencies& t) { return energy_components(s, t).total(); }

/// D = ||grad u||_{H^2} + ||grad u_t||_{H^1} + ||q||_{H^2} + ||q_t||_{H^1} + ||q_tt||.
inline DissipationComponents dissipation_D(const PerturbationState& s, const Tendencies& t) {
    DissipationComponents c;
    c.grad_u_h2 = detail::vector_gradient_range(s.u, 1, 3);
    c.grad_ut_h1 = detail::vector_gradient_range(t.u_t, 1, 2);
    c.q_h2 = sobolev_norm(s.q, 2);
    c.qt_h1 = sobolev_norm(t.q_t, 1);
    c.qtt = weighted_l2_norm(t.q_tt);
    return c;
}

/// Discrete integral of q with the 4 pi r^2 weight.
inline double mass(const RadialField& q) { return integrate(q); }

/// 1/2 [ sum w (rho-tilde u^2 + h'(rho-tilde) q^2) + ||grad phi||^2 ].
inline double basic_energy(const PerturbationState& s, const PerturbationModel& m) {
    const auto& w = m.grid().weights();
    const auto& rho = m.rho_tilde();
    const auto& hp = m.enthalpy_prime();
    double e = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) e += w[i] * (rho[i] * s.u[i] * s.u[i] + hp[i] * s.q[i] * s.q[i]);
    if (m.options().coupling) e += dirichlet_energy(m.grid(), s.phi.values());
    return 0.5 * e;
}

struct EnergySample {
    double t = 0.0;
    double E = 0.0;
    double D = 0.0;
    double D_no_qtt = 0.0;
    double mass = 0.0;
    double E_basic = 0.0;
    double identity_residual = 0.0;
    double min_density = 0.0;
    /// Dissipation rate entering the identity: (2 mu + lambda) ||grad u||^2 plus sponge work.
    double dissipation = 0.0;
    double grad_u_sq = 0.0; ///< ||grad u||^2 in the discrete form dissipated by the scheme
};

inline EnergySample sample_energy(const PerturbationState& s, const PerturbationModel& m) {
    const auto t = m.tendencies(s);
    EnergySample e;
    e.t = s.t;
    e.E = energy_E(s, t);
    const auto d = dissipation_D(s, t);
    e.D = d.D();
    e.D_no_qtt = d.D_no_qtt();
    e.mass = mass(s.q);
    e.E_basic = basic_energy(s, m);
    e.min_density = m.min_density(s.q);
    e.grad_u_sq = m.viscous_dissipation_norm2(s.u.values());
    e.dissipation = m.viscosity() * e.grad_u_sq + m.sponge_work(s.u.values());
    return e;
}

/// dE_basic/dt (centered over the window) + (2 mu + lambda)||grad u||^2 (+ sponge work) at the
/// middle sample of three consecutive samples.
inline double basic_energy_identity_residual(std::span<const EnergySample> window) {
    if (window.size() < 3) throw ParameterError("basic_energy_identity_residual: need at least 3 samples");
    const auto& a = window[0];
    const auto& b = window[1];
    const auto& c = window[2];
    if (!(c.t > a.t)) throw ParameterError("basic_energy_identity_residual: times must increase");
    // second-order derivative at b on a possibly uneven stencil
    const double h1 = b.t - a.t, h2 = c.t - b.t;
    const double dEdt = (-h2 / (h1 * (h1 + h2))) * a.E_basic + ((h2 - h1) / (h1 * h2)) * b.E_basic +
                        (h1 / (h2 * (h1 + h2))) * c.E_basic;
    return dEdt + b.dissipation;
}

/// Fills identity_residual for every sample; the end samples use one-sided three-point stencils.
inline void fill_identity_residuals(std::vector<EnergySample>& s) {
    const std::size_t n = s.size();
    if (n < 3) {
        for (auto& e : s) e.identity_residual = 0.0;
        return;
    }
    for (std::size_t i = 1; i + 1 < n; ++i)
        s[i].identity_residual = basic_energy_identity_residual(std::span<const EnergySample>(s.data() + i - 1, 3));
    auto one_sided = [&](std::size_t k, std::size_t a, std::size_t b, std::size_t c) {
        std::array<double, 3> x{s[a].t, s[b].t, s[c].t};
        const auto w = detail::fornberg_weights(s[k].t, x, 1);
        return w[0] * s[a].E_basic + w[1] * s[b].E_basic + w[2] * s[c].E_basic + s[k].dissipation;
    };
    s[0].identity_residual = one_sided(0, 0, 1, 2);
    s[n - 1].identity_residual = one_sided(n - 1, n - 3, n - 2, n - 1);
}

struct StabilityVerdict {
    double margin = 2.0;
    double c_fit = 0.0;
    double sup_E_ratio = 0.0;   ///< sup_t E(t)/E(0)
    double sup_combined = 0.0;  ///< sup_t (E^2(t) + c_fit int_0^t D^2 ds) / E^2(0)
    double final_integral = 0.0; ///< int_0^T D^2 ds
    bool pass = false;
};

/// Measured dissipation efficiency (2 mu + lambda) int ||grad u||^2 ds / int D_no_qtt^2 ds.
inline double measured_viscous_constant(std::span<const EnergySample> s, double visc) {
    double num = 0.0, den = 0.0;
    for (std::size_t i = 1; i < s.size(); ++i) {
        const double dt = s[i].t - s[i - 1].t;
        num += 0.5 * dt * (s[i].grad_u_sq + s[i - 1].grad_u_sq);
        den += 0.5 * dt * (s[i].D_no_qtt * s[i].D_no_qtt + s[i - 1].D_no_qtt * s[i - 1].D_no_qtt);
    }
    return den > 0.0 ? visc * num / den : 0.0;
}

/// Stability check of E^2(t) + c int_0^t D^2 ds <= C E^2(0): PASS iff E(t)/E(0) <= margin and the
/// combined ratio <= margin^2 for every sample. D_no_qtt is used unless `with_qtt` is set.
inline StabilityVerdict check_theorem_bound(std::span<const EnergySample> s, double margin, double c_fit,
                                            bool with_qtt = false) {
    if (s.empty()) throw ParameterError("check_theorem_bound: empty series");
    const double e0 = s.front().E;
    if (!(e0 > 0.0)) throw ParameterError("check_theorem_bound: E(0) must be > 0");
    StabilityVerdict v;
    v.margin = margin;
    v.c_fit = c_fit;
    double integral = 0.0;
    auto d2 = [&](const EnergySample& e) { return with_qtt ? e.D * e.D : e.D_no_qtt * e.D_no_qtt; };
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (i > 0) integral += 0.5 * (s[i].t - s[i - 1].t) * (d2(s[i]) + d2(s[i - 1]));
        v.sup_E_ratio = std::max(v.sup_E_ratio, s[i].E / e0);
        v.sup_combined = std::max(v.sup_combined, (s[i].E * s[i].E + c_fit * integral) / (e0 * e0));
    }
    v.final_integral = integral;
    v.pass = v.sup_E_ratio <= margin && v.sup_combined <= margin * margin;
    return v;
}

} // namespace nsp
