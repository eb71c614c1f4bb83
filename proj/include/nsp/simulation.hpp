#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "nsp/energy.hpp"
#include "nsp/error.hpp"
#include "nsp/evolve.hpp"

namespace nsp {

/// Discrete E of the state built from `shape` scaled by `a`.
inline double scaled_energy(const InitialShape& shape, double a, const PerturbationModel& m) {
    auto s = m.make_state(a * shape.q, a * shape.u);
    return energy_E(s, m.tendencies(s));
}

/// Smooth compactly supported initial perturbation with zero discrete mass, u = 0 at both ends and
/// E(0) = delta. The amplitude is found by a secant iteration on a -> E(a shape).
inline PerturbationState init_perturbation(InitKind kind, double delta, const PerturbationModel& m) {
    if (!(delta >= 0.0) || !std::isfinite(delta)) throw ParameterError("init_perturbation: delta must be >= 0");
    const auto shape = initial_shape(kind, m);
    if (delta == 0.0) return m.make_state(0.0 * shape.q, 0.0 * shape.u);

    // E is a norm sum, so a0 = delta / E(shape) is exact up to the nonlinear part of the tendencies
    const double e1 = scaled_energy(shape, 1e-8, m) / 1e-8;
    if (!(e1 > 0.0)) throw InternalError("init_perturbation: degenerate initial shape");
    double a0 = delta / e1;
    double f0 = scaled_energy(shape, a0, m) - delta;
    double a1 = a0 * (1.0 - f0 / delta);
    for (int it = 0; it < 50; ++it) {
        const double f1 = scaled_energy(shape, a1, m) - delta;
        if (std::abs(f1) <= 1e-14 * delta || f1 == f0) break;
        const double a2 = a1 - f1 * (a1 - a0) / (f1 - f0);
        a0 = a1;
        f0 = f1;
        a1 = a2;
    }
    return m.make_state(a1 * shape.q, a1 * shape.u);
}

struct SimConfig {
    double t_end = 10.0;
    double dt = 0.0; ///< 0 selects the automatic step
    std::size_t output_stride = 1;
    double margin = 2.0;
    std::size_t max_steps = 50'000'000;
};

struct SimFailure {
    double t = 0.0;
    std::string kind; ///< "vacuum" or "numerical"
    std::string message;
};

struct TimeSeries {
    std::vector<EnergySample> samples;
    std::string config_digest;
    std::optional<StabilityVerdict> verdict; ///< absent when E(0) = 0 or the run failed early
    std::optional<SimFailure> failure;
    double dt = 0.0;
    std::size_t steps = 0;
    double c_fit = 0.0;
    double kappa = 0.0;          ///< max identity residual / max D^2 (divide by delta for the remainder constant)
    double max_mass_drift = 0.0; ///< max |mass(t) - mass(0)|
    PerturbationState final_state;
};

/// Called with (step, state) at every recorded sample.
using SampleObserver = std::function<void(std::size_t, const PerturbationState&)>;

/// Advances `initial` to t_end with a uniform step and records every output_stride steps. Vacuum
/// and numerical aborts are recorded in `failure` together with the series up to that time.
inline TimeSeries run_simulation(const PerturbationModel& m, const PerturbationState& initial, const SimConfig& cfg,
                                 const SampleObserver& observer = {}) {
    if (!(cfg.t_end > 0.0) || !std::isfinite(cfg.t_end)) throw ParameterError("run_simulation: t_end must be > 0");
    if (cfg.output_stride == 0) throw ParameterError("run_simulation: output_stride must be >= 1");
    if (!(cfg.dt >= 0.0)) throw ParameterError("run_simulation: dt must be >= 0");
    const double dt0 = cfg.dt > 0.0 ? cfg.dt : auto_time_step(initial, m, cfg.t_end);
    const auto nsteps = static_cast<std::size_t>(std::ceil(cfg.t_end / dt0 - 1e-9));
    if (nsteps > cfg.max_steps) throw ParameterError("run_simulation: step count exceeds max_steps");
    const double dt = cfg.t_end / static_cast<double>(nsteps);

    TimeSeries ts;
    ts.dt = dt;
    PerturbationState s = initial;
    auto record = [&](std::size_t step) {
        ts.samples.push_back(sample_energy(s, m));
        if (observer) observer(step, s);
    };
    try {
        record(0);
        for (std::size_t k = 1; k <= nsteps; ++k) {
            s = step_imex(s, dt, m);
            s.t = static_cast<double>(k) * dt;
            ts.steps = k;
            if (k % cfg.output_stride == 0 || k == nsteps) record(k);
        }
    } catch (const VacuumError& e) {
        ts.failure = SimFailure{e.time(), "vacuum", e.what()};
    } catch (const NumericalError& e) {
        ts.failure = SimFailure{e.time(), "numerical", e.what()};
    }
    fill_identity_residuals(ts.samples);

    const double m0 = ts.samples.front().mass;
    double max_res = 0.0, max_d2 = 0.0;
    for (const auto& e : ts.samples) {
        ts.max_mass_drift = std::max(ts.max_mass_drift, std::abs(e.mass - m0));
        max_res = std::max(max_res, std::abs(e.identity_residual));
        max_d2 = std::max(max_d2, e.D * e.D);
    }
    ts.kappa = max_d2 > 0.0 ? max_res / max_d2 : 0.0;
    ts.c_fit = measured_viscous_constant(ts.samples, m.viscosity());
    if (!ts.failure && ts.samples.front().E > 0.0) ts.verdict = check_theorem_bound(ts.samples, cfg.margin, ts.c_fit);
    ts.final_state = std::move(s);
    return ts;
}

/// 64-bit FNV-1a of `text` as 16 hex digits.
inline std::string fnv1a_digest(std::string_view text) {
    std::uint64_t h = 14695981039346656037ull;
    for (unsigned char c : text) {
        h ^= c;
        h *= 1099511628211ull;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

/// Writes `<dir>/state_<step>.txt` with columns r, q, u, phi.
inline void write_checkpoint(const std::filesystem::path& dir, std::size_t step, const PerturbationState& s) {
    std::filesystem::create_directories(dir);
    const auto path = dir / ("state_" + std::to_string(step) + ".txt");
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << "r q u phi\n";
    char buf[128];
    const auto& g = s.q.grid();
    for (std::size_t i = 0; i < g.size(); ++i) {
        std::snprintf(buf, sizeof buf, "%.17g %.17g %.17g %.17g\n", g.r(i), s.q[i], s.u[i], s.phi[i]);
        out << buf;
    }
}

} // namespace nsp
