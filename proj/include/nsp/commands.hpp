#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "nsp/config.hpp"
#include "nsp/energy.hpp"
#include "nsp/error.hpp"
#include "nsp/evolve.hpp"
#include "nsp/ineqlab.hpp"
#include "nsp/simulation.hpp"
#include "nsp/steady.hpp"

namespace nsp {

namespace exit_code {
inline constexpr int ok = 0;
inline constexpr int parse = 2;
inline constexpr int verdict = 3;
inline constexpr int runtime = 4;
} // namespace exit_code

/// One CLI invocation.
struct RunConfig {
    std::string subcommand;
    std::filesystem::path config_path;
    std::optional<std::filesystem::path> output_dir;
    std::vector<std::string> overrides;
    std::optional<std::uint64_t> seed;
};

namespace detail {

using json = nlohmann::json;
using Clock = std::chrono::steady_clock;

inline std::string utc_now() {
    const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

/// The only field of a JSON summary that differs between identical runs.
inline json timestamp_block(const std::string& started, Clock::time_point t0) {
    return json{{"started_utc", started},
                {"elapsed_s", std::chrono::duration<double>(Clock::now() - t0).count()}};
}

class CsvWriter {
public:
    CsvWriter(const std::filesystem::path& path, const std::vector<std::string>& header) : out_(path) {
        if (!out_) throw std::runtime_error("cannot write " + path.string());
        for (std::size_t i = 0; i < header.size(); ++i) out_ << (i ? "," : "") << header[i];
        out_ << '\n';
    }

    CsvWriter& num(double v) { return cell(format_number(v)); }
    CsvWriter& num(std::size_t v) { return cell(std::to_string(v)); }
    CsvWriter& str(const std::string& s) { return cell(s); }

    void end() {
        out_ << '\n';
        first_ = true;
    }

private:
    std::ofstream out_;
    bool first_ = true;

    CsvWriter& cell(const std::string& s) {
        if (!first_) out_ << ',';
        out_ << s;
        first_ = false;
        return *this;
    }
};

inline void write_json(const std::filesystem::path& path, const json& j) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << j.dump(2) << '\n';
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << text;
}

inline void write_profile(const std::filesystem::path& path, const RadialField& f) {
    CsvWriter w(path, {"r", "value"});
    const auto& g = f.grid();
    for (std::size_t i = 0; i < g.size(); ++i) {
        w.num(g.r(i)).num(f[i]);
        w.end();
    }
}

inline json to_json(const CertReport& c) {
    return json{{"role", to_string(c.role)},
                {"max_residual", c.max_residual},
                {"min_residual", c.min_residual},
                {"normal_derivative", c.normal_derivative},
                {"residual_ok", c.residual_ok},
                {"boundary_ok", c.boundary_ok},
                {"pass", c.pass}};
}

inline json run_header(const Config& c) {
    return json{{"config_digest", c.digest()}, {"seed", c.seed()}};
}

inline bool steady_pass(const SteadyState& s) { return s.bounds_ok && s.cert_super.pass && s.cert_sub.pass; }

/// Result of one simulate run, shared by `simulate` and every sweep job.
struct SimulateOutcome {
    json summary;
    int code = exit_code::ok;
    double elliptic_residual = 0.0;
    double truncation_residual = 0.0;
    bool steady_ok = false;
};

/// Solves the steady state, runs the perturbation and writes timeseries.csv and summary.json into
/// `dir`. Vacuum and non-finite aborts are recorded in the summary.
inline SimulateOutcome simulate_into(const Config& c, const std::filesystem::path& dir) {
    const auto started = utc_now();
    const auto t0 = Clock::now();
    std::filesystem::create_directories(dir);

    SimulateOutcome out;
    const auto steady = c.steady_problem().solve(c.steady_options());
    out.elliptic_residual = steady.residual_elliptic;
    out.truncation_residual = steady.truncation_residual;
    out.steady_ok = steady_pass(steady);
    const auto t_steady = Clock::now();

    const PerturbationModel model(steady, c.fluid, c.evolve.options, c.sponge());
    json summary = run_header(c);
    summary["gamma"] = c.fluid.gamma;
    summary["delta"] = c.evolve.delta;
    summary["n_cells"] = c.domain.n_cells;
    summary["r_outer"] = c.domain.r_outer;
    summary["steady"] = json{{"elliptic_residual", steady.residual_elliptic},
                             {"truncation_residual", steady.truncation_residual},
                             {"pass", out.steady_ok}};

    CsvWriter csv(dir / "timeseries.csv",
                  {"t", "E", "D", "D_no_qtt", "mass", "E_basic", "identity_residual", "min_density"});

    std::optional<PerturbationState> initial;
    try {
        initial = init_perturbation(c.evolve.init, c.evolve.delta, model);
    } catch (const VacuumError& e) {
        summary["failure"] = json{{"t", e.time()}, {"kind", "vacuum"}, {"message", e.what()}};
        summary["verdict"] = "FAIL";
        summary["timestamp"] = timestamp_block(started, t0);
        write_json(dir / "summary.json", summary);
        out.summary = std::move(summary);
        out.code = exit_code::runtime;
        return out;
    }

    SampleObserver observer;
    if (c.output.checkpoints)
        observer = [dir](std::size_t step, const PerturbationState& s) { write_checkpoint(dir / "checkpoints", step, s); };
    const auto ts = run_simulation(model, *initial, c.sim_config(), observer);
    const auto t_run = Clock::now();

    for (const auto& e : ts.samples) {
        csv.num(e.t).num(e.E).num(e.D).num(e.D_no_qtt).num(e.mass).num(e.E_basic).num(e.identity_residual).num(
            e.min_density);
        csv.end();
    }

    const double e0 = ts.samples.front().E;
    const double q0 = weighted_l2_norm(initial->q);
    double max_e = 0.0;
    for (const auto& e : ts.samples) max_e = std::max(max_e, e.E);
    summary["E0"] = e0;
    summary["max_E"] = max_e;
    summary["dt"] = ts.dt;
    summary["steps"] = ts.steps;
    summary["samples"] = ts.samples.size();
    summary["c_fit"] = ts.c_fit;
    summary["kappa"] = ts.kappa;
    summary["max_mass_drift"] = ts.max_mass_drift;
    summary["mass_drift_relative"] = q0 > 0.0 ? ts.max_mass_drift / q0 : 0.0;
    summary["margin"] = c.evolve.margin;

    std::string verdict;
    if (ts.failure) {
        summary["failure"] = json{{"t", ts.failure->t}, {"kind", ts.failure->kind}, {"message", ts.failure->message}};
        verdict = "FAIL";
        out.code = exit_code::runtime;
    } else if (ts.verdict) {
        summary["sup_ratio"] = ts.verdict->sup_E_ratio;
        summary["sup_combined"] = ts.verdict->sup_combined;
        summary["final_integral"] = ts.verdict->final_integral;
        summary["verdict_basis"] = "stability_bound";
        verdict = ts.verdict->pass ? "PASS" : "FAIL";
        if (!ts.verdict->pass) out.code = exit_code::verdict;
    } else {
        // E(0) = 0: the run checks equilibrium preservation instead
        summary["verdict_basis"] = "equilibrium";
        verdict = max_e < 1e-9 ? "PASS" : "FAIL";
        if (verdict == "FAIL") out.code = exit_code::verdict;
    }
    if (!summary.contains("failure")) summary["failure"] = nullptr;
    summary["verdict"] = verdict;
    auto stamp = timestamp_block(started, t0);
    stamp["steady_s"] = std::chrono::duration<double>(t_steady - t0).count();
    stamp["simulate_s"] = std::chrono::duration<double>(t_run - t_steady).count();
    summary["timestamp"] = stamp;
    write_json(dir / "summary.json", summary);
    out.summary = std::move(summary);
    return out;
}

inline json to_json(const IneqReport& r) {
    json j{{"id", r.id},
           {"ensemble_size", r.ensemble_size},
           {"max_ratio", r.max_ratio},
           {"mean_ratio", r.mean_ratio},
           {"min_ratio", r.min_ratio},
           {"allowance", r.allowance},
           {"verdict", to_string(r.verdict)}};
    j["claimed_constant"] = r.claimed_constant ? json(*r.claimed_constant) : json(nullptr);
    return j;
}

inline json grid_json(const IneqConfig& c) {
    return json{{"r_inner", c.r_inner}, {"r_outer", c.r_outer}, {"nr", c.nr},
                {"ntheta", c.ntheta},   {"nphi", c.nphi},       {"radial_cells", c.radial_cells}};
}

inline unsigned sweep_threads(std::size_t jobs) {
    unsigned n = std::max(1u, std::thread::hardware_concurrency());
    if (const char* env = std::getenv("NSP_THREADS")) {
        char* end = nullptr;
        const long v = std::strtol(env, &end, 10);
        if (end == env || *end != '\0' || v < 1) throw ParseError("NSP_THREADS must be a positive integer");
        n = static_cast<unsigned>(v);
    }
    return static_cast<unsigned>(std::min<std::size_t>(n, std::max<std::size_t>(jobs, 1)));
}

} // namespace detail

/// Solves the steady state and writes rho_tilde.csv, phi_tilde.csv, b.csv and certificate.json.
/// Exit 0 iff the bounds and both sub/super certificates pass.
inline int cmd_steady(const Config& c, std::ostream& log = std::cout) {
    using detail::json;
    const auto started = detail::utc_now();
    const auto t0 = detail::Clock::now();
    const std::filesystem::path dir = c.output.dir;
    std::filesystem::create_directories(dir);
    detail::write_text(dir / "config.resolved", c.canonical);

    const auto s = c.steady_problem().solve(c.steady_options());
    detail::write_profile(dir / "rho_tilde.csv", s.rho_tilde);
    detail::write_profile(dir / "phi_tilde.csv", s.phi_tilde);
    detail::write_profile(dir / "b.csv", s.profile.values);

    const auto reg = regularity_norms(s);
    const bool pass = detail::steady_pass(s);
    json j = detail::run_header(c);
    j["gamma"] = s.gamma;
    j["c_star"] = s.c_star;
    j["profile"] = to_string(c.steady.kind);
    j["amplitude"] = c.steady.amplitude;
    j["n_cells"] = c.domain.n_cells;
    j["bounds"] = json{{"pass", s.bounds_ok}, {"min_rho_margin", s.min_rho_margin}, {"max_rho_excess", s.max_rho_excess}};
    j["residual"] = json{{"elliptic", s.residual_elliptic}, {"truncation", s.truncation_residual}};
    j["iterations"] = json{{"super", s.iterations_super}, {"sub", s.iterations_sub}, {"limit_gap", s.limit_gap}};
    j["certificates"] = json{{"super", detail::to_json(s.cert_super)}, {"sub", detail::to_json(s.cert_sub)}};
    j["regularity"] = json{{"grad_rho", reg.grad_rho},
                           {"grad_phi", reg.grad_phi},
                           {"compatibility_residual", reg.compatibility_residual}};
    j["verdict"] = pass ? "PASS" : "FAIL";
    j["timestamp"] = detail::timestamp_block(started, t0);
    detail::write_json(dir / "certificate.json", j);
    log << "steady: bounds " << (s.bounds_ok ? "PASS" : "FAIL") << ", super " << (s.cert_super.pass ? "PASS" : "FAIL")
        << ", sub " << (s.cert_sub.pass ? "PASS" : "FAIL") << ", residual " << s.residual_elliptic << '\n';
    return pass ? exit_code::ok : exit_code::verdict;
}

/// Runs one perturbation simulation and writes timeseries.csv and summary.json.
inline int cmd_simulate(const Config& c, std::ostream& log = std::cout) {
    const std::filesystem::path dir = c.output.dir;
    std::filesystem::create_directories(dir);
    detail::write_text(dir / "config.resolved", c.canonical);
    const auto r = detail::simulate_into(c, dir);
    log << "simulate: verdict " << r.summary["verdict"].get<std::string>();
    if (r.summary.contains("sup_ratio")) log << ", sup E/E0 " << r.summary["sup_ratio"].get<double>();
    if (!r.summary["failure"].is_null()) log << ", failure at t = " << r.summary["failure"]["t"].get<double>();
    log << '\n';
    return r.code;
}

/// Runs the inequality suite and writes inequalities.json and inequalities.csv. With refinement
/// enabled every block also carries the doubled-grid result and its relative change.
inline int cmd_verify_inequalities(const Config& c, std::ostream& log = std::cout) {
    using detail::json;
    const auto started = detail::utc_now();
    const auto t0 = detail::Clock::now();
    const std::filesystem::path dir = c.output.dir;
    const auto cfg = c.ineq_config();
    cfg.validate();
    std::filesystem::create_directories(dir);
    detail::write_text(dir / "config.resolved", c.canonical);

    const auto base = run_inequality_suite(cfg);
    std::vector<IneqReport> fine;
    IneqConfig fine_cfg;
    if (c.ineqlab.refine) {
        fine_cfg = cfg.refined();
        fine_cfg.pairing_allowance = c.ineqlab.refined_pairing_allowance;
        fine = run_inequality_suite(fine_cfg);
    }

    detail::CsvWriter csv(dir / "inequalities.csv", {"id", "grid", "ensemble_size", "max_ratio", "mean_ratio",
                                                     "min_ratio", "claimed_constant", "allowance", "verdict"});
    auto row = [&](const IneqReport& r, const char* grid) {
        csv.str(r.id).str(grid).num(r.ensemble_size).num(r.max_ratio).num(r.mean_ratio).num(r.min_ratio);
        if (r.claimed_constant)
            csv.num(*r.claimed_constant);
        else
            csv.str("");
        csv.num(r.allowance).str(to_string(r.verdict));
        csv.end();
    };

    bool failed = false;
    json blocks = json::array();
    for (std::size_t i = 0; i < base.size(); ++i) {
        json b = detail::to_json(base[i]);
        row(base[i], "base");
        failed = failed || base[i].verdict == Verdict::fail;
        if (!fine.empty()) {
            b["refined"] = detail::to_json(fine[i]);
            b["relative_change"] =
                base[i].max_ratio != 0.0 ? std::abs(fine[i].max_ratio - base[i].max_ratio) / base[i].max_ratio : 0.0;
            row(fine[i], "refined");
            failed = failed || fine[i].verdict == Verdict::fail;
        }
        blocks.push_back(std::move(b));
        log << "verify-inequalities: " << base[i].id << " max " << base[i].max_ratio << ' ' << to_string(base[i].verdict)
            << '\n';
    }

    json j = detail::run_header(c);
    j["grid"] = detail::grid_json(cfg);
    if (!fine.empty()) j["refined_grid"] = detail::grid_json(fine_cfg);
    j["ensemble"] = json{{"seeds", cfg.seeds}, {"scalars", cfg.scalars}, {"modes", cfg.modes}};
    j["blocks"] = std::move(blocks);
    j["verdict"] = failed ? "FAIL" : "PASS";
    j["timestamp"] = detail::timestamp_block(started, t0);
    detail::write_json(dir / "inequalities.json", j);
    return failed ? exit_code::verdict : exit_code::ok;
}

/// Runs the Cartesian product of the [sweep] lists concurrently. Job k writes into
/// `<out>/run_<k>/`; sweep.csv holds one summary row per job in job order.
inline int cmd_sweep(const Config& c, std::ostream& log = std::cout) {
    const std::filesystem::path dir = c.output.dir;
    auto or_single = [](auto list, auto v) { return list.empty() ? decltype(list){v} : list; };
    const auto gammas = or_single(c.sweep.gamma, c.fluid.gamma);
    const auto deltas = or_single(c.sweep.delta, c.evolve.delta);
    const auto cells = or_single(c.sweep.n_cells, c.domain.n_cells);
    const auto outers = or_single(c.sweep.r_outer, c.domain.r_outer);

    std::vector<Config> jobs;
    for (double g : gammas)
        for (double d : deltas)
            for (auto n : cells)
                for (double ro : outers) jobs.push_back(sweep_point(c, g, d, n, ro));
    const unsigned threads = detail::sweep_threads(jobs.size());
    std::filesystem::create_directories(dir);
    detail::write_text(dir / "config.resolved", c.canonical);

    struct Row {
        detail::SimulateOutcome out;
        std::string error;
    };
    std::vector<Row> rows(jobs.size());
    std::atomic<std::size_t> next{0};
    std::mutex log_mutex;
    auto worker = [&] {
        for (std::size_t k = next++; k < jobs.size(); k = next++) {
            char name[32];
            std::snprintf(name, sizeof name, "run_%03zu", k);
            try {
                Config job = jobs[k];
                job.output.dir = (dir / name).string();
                std::filesystem::create_directories(dir / name);
                detail::write_text(dir / name / "config.resolved", job.canonical);
                rows[k].out = detail::simulate_into(job, dir / name);
            } catch (const std::exception& e) {
                rows[k].error = e.what();
                rows[k].out.code = exit_code::runtime;
            }
            std::lock_guard lock(log_mutex);
            log << "sweep: " << name << " done (exit " << rows[k].out.code << ")\n";
        }
    };
    std::vector<std::thread> pool;
    for (unsigned i = 1; i < threads; ++i) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();

    detail::CsvWriter csv(dir / "sweep.csv",
                          {"run", "gamma", "delta", "n_cells", "r_outer", "steady_residual", "elliptic_residual",
                           "steady_pass", "E0", "sup_ratio", "sup_combined", "c_fit", "kappa", "max_mass_drift", "dt",
                           "steps", "verdict", "failure_t"});
    int code = exit_code::ok;
    for (std::size_t k = 0; k < jobs.size(); ++k) {
        const auto& j = jobs[k];
        const auto& r = rows[k];
        const auto& s = r.out.summary;
        auto num = [&](const char* key) {
            if (s.contains(key) && s[key].is_number())
                csv.num(s[key].get<double>());
            else
                csv.str("");
        };
        csv.num(k).num(j.fluid.gamma).num(j.evolve.delta).num(j.domain.n_cells).num(j.domain.r_outer);
        if (r.error.empty()) {
            csv.num(r.out.truncation_residual).num(r.out.elliptic_residual).str(r.out.steady_ok ? "true" : "false");
        } else {
            csv.str("").str("").str("");
        }
        num("E0");
        num("sup_ratio");
        num("sup_combined");
        num("c_fit");
        num("kappa");
        num("max_mass_drift");
        num("dt");
        num("steps");
        csv.str(r.error.empty() ? s.value("verdict", "FAIL") : "ERROR");
        if (s.contains("failure") && !s["failure"].is_null())
            csv.num(s["failure"]["t"].get<double>());
        else
            csv.str("");
        csv.end();
        if (r.out.code == exit_code::runtime)
            code = exit_code::runtime;
        else if (r.out.code == exit_code::verdict && code == exit_code::ok)
            code = exit_code::verdict;
        if (!r.error.empty()) log << "sweep: run " << k << " aborted: " << r.error << '\n';
    }
    log << "sweep: " << jobs.size() << " runs on " << threads << " threads\n";
    return code;
}

/// Reads the configuration named by `run`, applies overrides, seed and output directory.
inline Config load_config(const RunConfig& run) {
    std::ifstream in(run.config_path);
    if (!in) throw ParseError("cannot read config file " + run.config_path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    Config c = parse_config(ss.str(), run.overrides);
    if (run.seed) set_seed(c, *run.seed);
    if (run.output_dir) c.output.dir = run.output_dir->string();
    return c;
}

/// Dispatches one invocation and maps failures to exit codes: 2 for configuration errors, 4 for
/// runtime aborts.
inline int run_command(const RunConfig& run, std::ostream& log = std::cout, std::ostream& err = std::cerr) {
    try {
        const Config c = load_config(run);
        if (run.subcommand == "steady") return cmd_steady(c, log);
        if (run.subcommand == "simulate") return cmd_simulate(c, log);
        if (run.subcommand == "verify-inequalities") return cmd_verify_inequalities(c, log);
        if (run.subcommand == "sweep") return cmd_sweep(c, log);
        err << "error: unknown subcommand '" << run.subcommand << "'\n";
        return exit_code::parse;
    } catch (const ParseError& e) {
        err << "parse error: " << e.what() << '\n';
        return exit_code::parse;
    } catch (const ParameterError& e) {
        err << "parameter error: " << e.what() << '\n';
        return exit_code::parse;
    } catch (const std::exception& e) {
        err << "runtime error: " << e.what() << '\n';
        return exit_code::runtime;
    }
}

} // namespace nsp
