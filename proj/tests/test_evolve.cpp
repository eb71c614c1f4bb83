#include <gtest/gtest.h>

#include <cmath>
#include <memory>
#include <vector>

#include "nsp/simulation.hpp"

using namespace nsp;

namespace {

SteadyState steady_for(double gamma, std::size_t n, double rmax = 16.0, ProfileKind kind = ProfileKind::admissible_bump) {
    SteadyProblem p;
    p.gamma = gamma;
    p.n_cells = n;
    p.r_outer = rmax;
    p.kind = kind;
    return p.solve();
}

FluidParams fluid(double gamma) {
    FluidParams f;
    f.gamma = gamma;
    return f;
}

double max_abs_diff(const RadialField& a, const RadialField& b) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

double l2_diff(const RadialField& a, const RadialField& b) { return weighted_l2_norm(a - b); }

// Smooth velocity vanishing at both ends.
RadialField smooth_u(const GridPtr& g, double amp) {
    const double R = g->r_inner(), L = g->r_outer() - R;
    return RadialField::from_function(g, [&](double r) {
        const double x = (r - R) / L;
        return amp * std::sin(std::numbers::pi * x) * std::sin(std::numbers::pi * x) * std::exp(-8.0 * x);
    });
}

RadialField smooth_q(const GridPtr& g, double amp) {
    return RadialField::from_function(g, [&](double r) { return amp * std::exp(-(r - 3.0) * (r - 3.0)); });
}

} // namespace

TEST(Tendencies, SteadyStateIsAnEquilibrium) {
    const auto st = steady_for(2.0, 400);
    PerturbationModel m(st, fluid(2.0));
    const auto s = m.make_state(RadialField::zeros(st.grid_ptr()), RadialField::zeros(st.grid_ptr()));
    const auto t = m.tendencies(s);
    EXPECT_EQ(t.q_t.max_abs(), 0.0);
    EXPECT_EQ(t.u_t.max_abs(), 0.0);
    EXPECT_EQ(t.phi_t.max_abs(), 0.0);
    EXPECT_EQ(t.q_tt.max_abs(), 0.0);
}

TEST(Tendencies, ContinuityMatchesAnalyticDivergence) {
    // rho-tilde = c* = 1, q = e^{-(r-3)^2}/10, u = sin^2(pi x) e^{-8x}: compare q_t to -(1/r^2)(r^2 rho u)'
    auto error_at = [](std::size_t n) {
        const auto st = steady_for(2.0, n, 6.0, ProfileKind::constant);
        PerturbationModel m(st, fluid(2.0));
        const auto& g = st.grid_ptr();
        const auto s = m.make_state(smooth_q(g, 0.1), smooth_u(g, 0.05));
        const auto t = m.tendencies(s);
        const double R = 1.0, L = 5.0, pi = std::numbers::pi;
        double err = 0.0;
        for (std::size_t i = 1; i + 1 < g->size(); ++i) {
            const double r = g->r(i), x = (r - R) / L;
            const double rho = 1.0 + 0.1 * std::exp(-(r - 3.0) * (r - 3.0));
            const double drho = -0.2 * (r - 3.0) * std::exp(-(r - 3.0) * (r - 3.0));
            const double sn = std::sin(pi * x), cs = std::cos(pi * x), e = std::exp(-8.0 * x);
            const double u = 0.05 * sn * sn * e;
            const double du = 0.05 * e * (2.0 * sn * cs * pi / L - 8.0 * sn * sn / L);
            const double exact = -(2.0 * rho * u / r + drho * u + rho * du);
            err = std::max(err, std::abs(t.q_t[i] - exact));
        }
        return err;
    };
    const double e1 = error_at(200), e2 = error_at(400);
    EXPECT_LT(e2, 1e-4);
    EXPECT_GT(e1 / e2, 3.5);
}

TEST(Tendencies, NonlinearPartScalesQuadratically) {
    const auto st = steady_for(2.0, 400);
    PerturbationModel nl(st, fluid(2.0));
    PerturbationModel lin(st, fluid(2.0), EvolveOptions{.nonlinear = false});
    const auto& g = st.grid_ptr();
    std::vector<double> x, y;
    for (double d : {1e-4, 1e-3, 1e-2}) {
        const auto s = nl.make_state(smooth_q(g, d), smooth_u(g, d));
        const auto a = nl.tendencies(s), b = lin.tendencies(s);
        const double dev = l2_diff(a.q_t, b.q_t) + l2_diff(a.u_t, b.u_t);
        x.push_back(std::log(d));
        y.push_back(std::log(dev));
    }
    const double slope1 = (y[1] - y[0]) / (x[1] - x[0]);
    const double slope2 = (y[2] - y[1]) / (x[2] - x[1]);
    EXPECT_NEAR(slope1, 2.0, 0.05);
    EXPECT_NEAR(slope2, 2.0, 0.05);
}

TEST(Tendencies, RejectsVacuum) {
    const auto st = steady_for(2.0, 200);
    PerturbationModel m(st, fluid(2.0));
    const auto& g = st.grid_ptr();
    EXPECT_THROW(m.make_state(RadialField::constant(g, -0.95), RadialField::zeros(g)), VacuumError);
}

TEST(Tendencies, GammaMismatchIsRejected) {
    const auto st = steady_for(2.0, 200);
    EXPECT_THROW(PerturbationModel(st, fluid(1.5)), ParameterError);
}

TEST(StepImex, ZeroStepLeavesStateUnchanged) {
    const auto st = steady_for(2.0, 200);
    PerturbationModel m(st, fluid(2.0));
    const auto s = init_perturbation(InitKind::compensated, 1e-3, m);
    const auto t = step_imex(s, 0.0, m);
    EXPECT_EQ(t.t, s.t);
    EXPECT_EQ(t.q.values(), s.q.values());
    EXPECT_EQ(t.u.values(), s.u.values());
    EXPECT_EQ(t.phi.values(), s.phi.values());
}

TEST(StepImex, RejectsInvalidSteps) {
    const auto st = steady_for(2.0, 200);
    PerturbationModel m(st, fluid(2.0));
    const auto s = init_perturbation(InitKind::compensated, 1e-3, m);
    EXPECT_THROW(step_imex(s, -1.0, m), ParameterError);
    EXPECT_THROW(step_imex(s, std::nan(""), m), ParameterError);
    EXPECT_THROW(step_imex(s, m.cfl_limit(s), m), NumericalError);
}

TEST(StepImex, ViscousDecayMatchesFineReference) {
    // pressure and coupling off, rho-tilde = c*: u_t = (2 mu + lambda) d_r(div u)
    const auto st = steady_for(2.0, 200, 6.0, ProfileKind::constant);
    EvolveOptions opt{.nonlinear = false, .pressure = false, .coupling = false, .viscous = true};
    PerturbationModel m(st, fluid(2.0), opt, SpongeParams{.width_fraction = 0.0});
    const auto& g = st.grid_ptr();
    const auto s0 = m.make_state(RadialField::zeros(g), smooth_u(g, 1.0));
    const double T = 0.5;
    auto run = [&](int steps) {
        auto s = s0;
        for (int k = 0; k < steps; ++k) s = step_imex(s, T / steps, m);
        return s.u;
    };
    const auto ref = run(2560);
    const double e1 = max_abs_diff(run(10), ref), e2 = max_abs_diff(run(20), ref), e3 = max_abs_diff(run(40), ref);
    EXPECT_GT(std::log2(e1 / e2), 1.8);
    EXPECT_GT(std::log2(e2 / e3), 1.8);
    EXPECT_LT(e3, 1e-3 * s0.u.max_abs());
    // the profile actually decays
    EXPECT_LT(ref.max_abs(), 0.9 * s0.u.max_abs());
}

TEST(StepImex, SecondOrderOnSmoothData) {
    const auto st = steady_for(2.0, 200);
    PerturbationModel m(st, fluid(2.0));
    const auto s0 = init_perturbation(InitKind::compensated, 1e-3, m);
    const double dt = 0.2 * m.cfl_limit(s0);
    auto run = [&](int steps, double h) {
        auto s = s0;
        for (int k = 0; k < steps; ++k) s = step_imex(s, h, m);
        return s;
    };
    const auto a = run(4, dt), b = run(8, dt / 2), c = run(16, dt / 4);
    const double e1 = l2_diff(a.q, b.q) + l2_diff(a.u, b.u);
    const double e2 = l2_diff(b.q, c.q) + l2_diff(b.u, c.u);
    EXPECT_GE(std::log2(e1 / e2), 1.9);
}

TEST(StepImex, TimeReversibleAcousticsIsNeutral) {
    const auto st = steady_for(1.0, 400);
    EvolveOptions opt{.nonlinear = false, .pressure = true, .coupling = false, .viscous = false};
    PerturbationModel m(st, fluid(1.0), opt, SpongeParams{.width_fraction = 0.0});
    const auto shape = initial_shape(InitKind::compensated, m);
    auto s = m.make_state(1e-3 * shape.q, 1e-3 * shape.u);
    const double e0 = basic_energy(s, m);
    const double dt = auto_time_step(s, m, 1.0);
    for (int k = 0; k < 1000; ++k) s = step_imex(s, dt, m);
    EXPECT_LT(std::abs(basic_energy(s, m) - e0), 0.01 * e0);
}

TEST(StepImex, ConservesMass) {
    const auto st = steady_for(2.0, 400);
    PerturbationModel m(st, fluid(2.0));
    auto s = init_perturbation(InitKind::compensated, 1e-3, m);
    const double m0 = mass(s.q), qn = weighted_l2_norm(s.q);
    const double dt = auto_time_step(s, m, 1.0);
    double drift = 0.0;
    for (int k = 0; k < 300; ++k) {
        s = step_imex(s, dt, m);
        drift = std::max(drift, std::abs(mass(s.q) - m0));
    }
    EXPECT_LE(drift, 1e-10 * qn);
}

TEST(InitPerturbation, ZeroDeltaGivesZeroState) {
    const auto st = steady_for(2.0, 200);
    PerturbationModel m(st, fluid(2.0));
    const auto s = init_perturbation(InitKind::compensated, 0.0, m);
    EXPECT_EQ(s.q.max_abs(), 0.0);
    EXPECT_EQ(s.u.max_abs(), 0.0);
    EXPECT_EQ(energy_E(s, m.tendencies(s)), 0.0);
}

TEST(InitPerturbation, HitsRequestedEnergyWithZeroMass) {
    const auto st = steady_for(2.0, 400);
    PerturbationModel m(st, fluid(2.0));
    for (auto kind : {InitKind::compensated, InitKind::density_only, InitKind::velocity_only}) {
        const auto s = init_perturbation(kind, 1e-3, m);
        EXPECT_NEAR(energy_E(s, m.tendencies(s)), 1e-3, 1e-14) << to_string(kind);
        EXPECT_LE(std::abs(mass(s.q)), 1e-13 * std::max(weighted_l2_norm(s.q), 1e-300)) << to_string(kind);
        EXPECT_EQ(s.u[0], 0.0);
        EXPECT_EQ(s.u[s.u.size() - 1], 0.0);
        EXPECT_EQ(s.q[0], 0.0);
        EXPECT_EQ(s.q[s.q.size() - 1], 0.0);
    }
}

TEST(InitPerturbation, DoublingDeltaDoublesEnergy) {
    const auto st = steady_for(2.0, 400);
    PerturbationModel m(st, fluid(2.0));
    const auto a = init_perturbation(InitKind::compensated, 1e-3, m);
    const auto b = init_perturbation(InitKind::compensated, 2e-3, m);
    const double ea = energy_E(a, m.tendencies(a)), eb = energy_E(b, m.tendencies(b));
    EXPECT_NEAR(eb / ea, 2.0, 0.04);
    // amplitudes are near-proportional too
    EXPECT_NEAR(b.q.max_abs() / a.q.max_abs(), 2.0, 0.04);
}

TEST(InitPerturbation, RejectsBadDelta) {
    const auto st = steady_for(2.0, 200);
    PerturbationModel m(st, fluid(2.0));
    EXPECT_THROW(init_perturbation(InitKind::compensated, -1e-3, m), ParameterError);
    EXPECT_THROW(init_perturbation(InitKind::compensated, 1e6, m), VacuumError);
}

TEST(Simulation, ZeroDeltaStaysAtEquilibrium) {
    const auto st = steady_for(2.0, 400);
    PerturbationModel m(st, fluid(2.0));
    const auto s0 = init_perturbation(InitKind::compensated, 0.0, m);
    SimConfig cfg;
    cfg.t_end = 2.0;
    cfg.output_stride = 10;
    const auto ts = run_simulation(m, s0, cfg);
    ASSERT_FALSE(ts.failure);
    EXPECT_FALSE(ts.verdict);
    for (const auto& e : ts.samples) {
        EXPECT_EQ(e.E, 0.0);
        EXPECT_EQ(e.mass, 0.0);
    }
}

TEST(Simulation, RecordsSamplesAtStride) {
    const auto st = steady_for(2.0, 200);
    PerturbationModel m(st, fluid(2.0));
    const auto s0 = init_perturbation(InitKind::compensated, 1e-3, m);
    SimConfig cfg;
    cfg.t_end = 1.0;
    cfg.output_stride = 7;
    std::vector<std::size_t> seen;
    const auto ts = run_simulation(m, s0, cfg, [&](std::size_t k, const PerturbationState&) { seen.push_back(k); });
    ASSERT_FALSE(ts.failure);
    ASSERT_GE(ts.samples.size(), 3u);
    EXPECT_EQ(seen.front(), 0u);
    EXPECT_EQ(seen.back(), ts.steps);
    for (std::size_t i = 1; i + 1 < seen.size(); ++i) EXPECT_EQ(seen[i] % 7, 0u);
    for (std::size_t i = 1; i < ts.samples.size(); ++i) EXPECT_GT(ts.samples[i].t, ts.samples[i - 1].t);
    EXPECT_NEAR(ts.samples.back().t, 1.0, 1e-12);
    ASSERT_TRUE(ts.verdict);
}

TEST(Simulation, RecordsVacuumFailure) {
    const auto st = steady_for(2.0, 200);
    PerturbationModel m(st, fluid(2.0), EvolveOptions{}, SpongeParams{.width_fraction = 0.0});
    const auto& g = st.grid_ptr();
    // strong inward flow piles up mass at R and drains the outer shell
    auto u = RadialField::from_function(g, [&](double r) {
        const double x = (r - 1.0) / 15.0;
        return -3.0 * std::sin(std::numbers::pi * x);
    });
    const auto s0 = m.make_state(RadialField::zeros(g), u);
    SimConfig cfg;
    cfg.t_end = 20.0;
    cfg.output_stride = 50;
    const auto ts = run_simulation(m, s0, cfg);
    ASSERT_TRUE(ts.failure);
    EXPECT_GT(ts.failure->t, 0.0);
    EXPECT_FALSE(ts.verdict);
}

TEST(Simulation, FnvDigestIsStable) {
    EXPECT_EQ(fnv1a_digest(""), "cbf29ce484222325");
    EXPECT_EQ(fnv1a_digest("a"), "af63dc4c8601ec8c");
}
