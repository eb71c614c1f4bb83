#pragma once

#include <charconv>
#include <cmath>
#include <concepts>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "nsp/error.hpp"
#include "nsp/evolve.hpp"
#include "nsp/ineqlab.hpp"
#include "nsp/params.hpp"
#include "nsp/simulation.hpp"
#include "nsp/steady.hpp"

namespace nsp {

struct DomainConfig {
    double r_inner = 1.0;
    double r_outer = 16.0;
    std::size_t n_cells = 2000;
    double stretch = 0.0;
};

struct SteadySettings {
    ProfileKind kind = ProfileKind::admissible_bump;
    double amplitude = 0.5;
    EnvelopeParams envelope;
    double tol = 1e-10;
    double agree_tol = 1e-9;
    int max_iter = 200;
};

struct EvolveSettings {
    double delta = 1e-3;
    InitKind init = InitKind::compensated;
    double t_end = 10.0;
    std::optional<double> dt;           ///< empty selects the automatic step
    std::size_t output_stride = 1;
    std::optional<double> sponge_width; ///< length; empty selects 20% of the shell
    std::optional<double> sponge_rate;  ///< 1/time; empty selects the acoustic rate
    double margin = 2.0;
    EvolveOptions options;
};

struct IneqSettings {
    IneqConfig lab;
    bool refine = false;
    double refined_pairing_allowance = 0.02;
};

struct OutputSettings {
    std::string dir = "out";
    bool checkpoints = false;
};

/// Value lists of the Cartesian sweep. Empty lists fall back to the single configured value.
struct SweepSettings {
    std::vector<double> gamma;
    std::vector<double> delta;
    std::vector<std::size_t> n_cells;
    std::vector<double> r_outer;
};

/// Fully typed run configuration.
struct Config {
    FluidParams fluid;
    DomainConfig domain;
    SteadySettings steady;
    EvolveSettings evolve;
    IneqSettings ineqlab;
    OutputSettings output;
    SweepSettings sweep;
    std::string canonical; ///< resolved `section.key = value` lines, sorted

    std::uint64_t seed() const noexcept { return ineqlab.lab.seed; }
    std::string digest() const { return fnv1a_digest(canonical); }

    SteadyProblem steady_problem() const {
        SteadyProblem p;
        p.gamma = fluid.gamma;
        p.c_star = fluid.c_star;
        p.kind = steady.kind;
        p.amplitude = steady.amplitude;
        p.envelope = steady.envelope;
        p.r_inner = domain.r_inner;
        p.r_outer = domain.r_outer;
        p.n_cells = domain.n_cells;
        p.stretch = domain.stretch;
        return p;
    }

    SteadyOptions steady_options() const {
        SteadyOptions o;
        o.tol = steady.tol;
        o.agree_tol = steady.agree_tol;
        o.max_iter = steady.max_iter;
        return o;
    }

    SpongeParams sponge() const {
        SpongeParams s;
        if (evolve.sponge_width) s.width_fraction = *evolve.sponge_width / (domain.r_outer - domain.r_inner);
        if (evolve.sponge_rate) s.rate = *evolve.sponge_rate;
        return s;
    }

    SimConfig sim_config() const {
        SimConfig c;
        c.t_end = evolve.t_end;
        c.dt = evolve.dt.value_or(0.0);
        c.output_stride = evolve.output_stride;
        c.margin = evolve.margin;
        return c;
    }

    IneqConfig ineq_config() const {
        IneqConfig c = ineqlab.lab;
        c.fluid = fluid;
        return c;
    }
};

namespace detail {

struct ConfigEntry {
    std::string value;
    std::string where; ///< "line N" or "--set"
    bool used = false;
};

inline std::string_view trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

inline const std::vector<std::string>& config_sections() {
    static const std::vector<std::string> s{"fluid", "domain", "steady", "evolve", "ineqlab", "output", "sweep"};
    return s;
}

inline bool known_section(const std::string& s) {
    for (const auto& k : config_sections())
        if (k == s) return true;
    return false;
}

inline std::string format_number(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

class ConfigReader {
public:
    using Section = std::map<std::string, ConfigEntry>;

    std::map<std::string, Section> sections;

    bool has_section(const std::string& s) const { return sections.count(s) != 0; }

    const ConfigEntry* find(const std::string& sec, const std::string& key) {
        auto it = sections.find(sec);
        if (it == sections.end()) return nullptr;
        auto jt = it->second.find(key);
        if (jt == it->second.end()) return nullptr;
        jt->second.used = true;
        return &jt->second;
    }

    [[noreturn]] void fail(const std::string& sec, const std::string& key, const std::string& msg) const {
        std::string where = "default";
        auto it = sections.find(sec);
        if (it != sections.end()) {
            auto jt = it->second.find(key);
            if (jt != it->second.end()) where = jt->second.where;
        }
        throw ParseError("config: key '" + key + "' in [" + sec + "] (" + where + "): " + msg);
    }

    void require(bool ok, const std::string& sec, const std::string& key, const std::string& msg) const {
        if (!ok) fail(sec, key, msg);
    }

    void read(const std::string& sec, const std::string& key, double& out) {
        if (const auto* e = find(sec, key)) out = to_double(sec, key, e->value);
        canon(sec, key, format_number(out));
    }

    template <std::unsigned_integral T>
    void read(const std::string& sec, const std::string& key, T& out) {
        if (const auto* e = find(sec, key)) out = static_cast<T>(to_size(sec, key, e->value));
        canon(sec, key, std::to_string(out));
    }

    void read(const std::string& sec, const std::string& key, int& out) {
        if (const auto* e = find(sec, key)) {
            const auto v = to_size(sec, key, e->value);
            require(v <= 1'000'000'000, sec, key, "value too large");
            out = static_cast<int>(v);
        }
        canon(sec, key, std::to_string(out));
    }

    void read(const std::string& sec, const std::string& key, bool& out) {
        if (const auto* e = find(sec, key)) {
            if (e->value == "true")
                out = true;
            else if (e->value == "false")
                out = false;
            else
                fail(sec, key, "expected true or false, got '" + e->value + "'");
        }
        canon(sec, key, out ? "true" : "false");
    }

    void read(const std::string& sec, const std::string& key, std::string& out) {
        if (const auto* e = find(sec, key)) out = e->value;
        canon(sec, key, out);
    }

    /// Number or the word `auto`.
    void read_auto(const std::string& sec, const std::string& key, std::optional<double>& out) {
        if (const auto* e = find(sec, key)) {
            if (e->value == "auto")
                out.reset();
            else
                out = to_double(sec, key, e->value);
        }
        canon(sec, key, out ? format_number(*out) : "auto");
    }

    void read_list(const std::string& sec, const std::string& key, std::vector<double>& out) {
        if (const auto* e = find(sec, key)) {
            out.clear();
            for (const auto& item : split_list(sec, key, e->value)) out.push_back(to_double(sec, key, item));
        }
        std::string s;
        for (double v : out) s += (s.empty() ? "" : ", ") + format_number(v);
        canon(sec, key, s);
    }

    void read_list(const std::string& sec, const std::string& key, std::vector<std::size_t>& out) {
        if (const auto* e = find(sec, key)) {
            out.clear();
            for (const auto& item : split_list(sec, key, e->value)) out.push_back(to_size(sec, key, item));
        }
        std::string s;
        for (auto v : out) s += (s.empty() ? "" : ", ") + std::to_string(v);
        canon(sec, key, s);
    }

    void reject_unused() const {
        for (const auto& [sec, entries] : sections)
            for (const auto& [key, e] : entries)
                if (!e.used) throw ParseError("config: unknown key '" + key + "' in [" + sec + "] (" + e.where + ")");
    }

    /// Resolved values that define a run. Output and sweep keys are left out, so a sweep job and a
    /// direct run of the same point share a digest.
    std::string canonical() const {
        std::string s;
        for (const auto& [k, v] : canon_)
            if (k.rfind("output.", 0) != 0 && k.rfind("sweep.", 0) != 0) s += k + " = " + v + "\n";
        return s;
    }

private:
    std::map<std::string, std::string> canon_;

    void canon(const std::string& sec, const std::string& key, std::string v) { canon_[sec + "." + key] = std::move(v); }

    double to_double(const std::string& sec, const std::string& key, const std::string& v) const {
        char* end = nullptr;
        const double x = std::strtod(v.c_str(), &end);
        if (v.empty() || end != v.c_str() + v.size()) fail(sec, key, "expected a number, got '" + v + "'");
        if (!std::isfinite(x)) fail(sec, key, "value is not finite");
        return x;
    }

    std::uint64_t to_size(const std::string& sec, const std::string& key, const std::string& v) const {
        std::uint64_t x = 0;
        const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), x);
        if (v.empty() || ec != std::errc() || p != v.data() + v.size())
            fail(sec, key, "expected a nonnegative integer, got '" + v + "'");
        return x;
    }

    std::vector<std::string> split_list(const std::string& sec, const std::string& key, const std::string& v) const {
        std::vector<std::string> items;
        std::string_view rest = v;
        while (true) {
            const auto c = rest.find(',');
            const auto item = trim(rest.substr(0, c));
            if (item.empty()) fail(sec, key, "empty list item");
            items.emplace_back(item);
            if (c == std::string_view::npos) break;
            rest = rest.substr(c + 1);
        }
        return items;
    }
};

inline void add_entry(ConfigReader& r, const std::string& sec, const std::string& key, std::string value,
                      const std::string& where, bool replace) {
    if (!known_section(sec)) throw ParseError("config: unknown section [" + sec + "] (" + where + ")");
    if (key.empty()) throw ParseError("config: empty key (" + where + ")");
    auto& s = r.sections[sec];
    if (!replace && s.count(key)) throw ParseError("config: duplicate key '" + key + "' in [" + sec + "] (" + where + ")");
    s[key] = ConfigEntry{std::move(value), where, false};
}

} // namespace detail

/// Parses the flat `key = value` format with `[section]` headers, then applies `overrides` of the
/// form `section.key=value`. Unknown sections or keys, malformed values and violated invariants
/// throw ParseError naming the key and its line.
inline Config parse_config(std::string_view text, const std::vector<std::string>& overrides = {}) {
    using detail::trim;
    detail::ConfigReader r;
    std::string section;
    std::size_t lineno = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        const auto nl = text.find('\n', pos);
        std::string_view line = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
        pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
        ++lineno;
        const std::string where = "line " + std::to_string(lineno);
        const auto hash = line.find_first_of("#;");
        line = trim(line.substr(0, hash));
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']') throw ParseError("config: malformed section header (" + where + ")");
            section = std::string(trim(line.substr(1, line.size() - 2)));
            if (!detail::known_section(section))
                throw ParseError("config: unknown section [" + section + "] (" + where + ")");
            r.sections[section];
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string_view::npos) throw ParseError("config: expected key = value (" + where + ")");
        if (section.empty()) throw ParseError("config: key outside of any section (" + where + ")");
        detail::add_entry(r, section, std::string(trim(line.substr(0, eq))), std::string(trim(line.substr(eq + 1))),
                          where, false);
    }
    for (const auto& o : overrides) {
        const auto eq = o.find('=');
        const auto dot = o.find('.');
        if (eq == std::string::npos || dot == std::string::npos || dot > eq)
            throw ParseError("config: override '" + o + "' must have the form section.key=value");
        detail::add_entry(r, std::string(trim(std::string_view(o).substr(0, dot))),
                          std::string(trim(std::string_view(o).substr(dot + 1, eq - dot - 1))),
                          std::string(trim(std::string_view(o).substr(eq + 1))), "--set", true);
    }

    if (!r.has_section("domain"))
        throw ParseError("config: missing [domain] section; required keys: r_inner, r_outer, n_cells");
    for (const char* key : {"r_inner", "r_outer", "n_cells"})
        if (!r.sections["domain"].count(key))
            throw ParseError(std::string("config: missing required key '") + key + "' in [domain]");

    Config c;

    auto& f = c.fluid;
    r.read("fluid", "gamma", f.gamma);
    r.read("fluid", "mu", f.mu);
    r.read("fluid", "lambda", f.lambda_);
    r.read("fluid", "alpha", f.alpha);
    r.read("fluid", "c_star", f.c_star);
    r.require(f.gamma >= 1.0, "fluid", "gamma", "gamma must be >= 1");
    r.require(f.mu > 0.0, "fluid", "mu", "mu must be > 0");
    r.require(f.lambda_ + 2.0 * f.mu / 3.0 >= 0.0, "fluid", "lambda", "lambda + 2/3 mu must be >= 0");
    r.require(f.c_star > 0.0, "fluid", "c_star", "c_star must be > 0");

    auto& d = c.domain;
    r.read("domain", "r_inner", d.r_inner);
    r.read("domain", "r_outer", d.r_outer);
    r.read("domain", "n_cells", d.n_cells);
    r.read("domain", "stretch", d.stretch);
    r.require(d.r_inner > 0.0, "domain", "r_inner", "r_inner must be > 0");
    r.require(d.r_outer > d.r_inner, "domain", "r_outer", "r_outer must exceed r_inner");
    r.require(d.n_cells >= 8, "domain", "n_cells", "n_cells must be >= 8");
    r.require(d.stretch >= 0.0, "domain", "stretch", "stretch must be >= 0");

    auto& s = c.steady;
    std::string profile = to_string(s.kind);
    r.read("steady", "profile", profile);
    if (profile == "constant")
        s.kind = ProfileKind::constant;
    else if (profile == "admissible_bump")
        s.kind = ProfileKind::admissible_bump;
    else if (profile == "general_gamma_envelope")
        s.kind = ProfileKind::general_gamma_envelope;
    else
        r.fail("steady", "profile", "expected constant, admissible_bump or general_gamma_envelope");
    r.read("steady", "amplitude", s.amplitude);
    r.read("steady", "envelope_c0", s.envelope.c0);
    r.read("steady", "envelope_eps", s.envelope.eps);
    r.read("steady", "tol", s.tol);
    r.read("steady", "agree_tol", s.agree_tol);
    r.read("steady", "max_iter", s.max_iter);
    r.require(s.amplitude >= 0.0 && s.amplitude <= 1.0, "steady", "amplitude", "amplitude must lie in [0, 1]");
    if (s.kind == ProfileKind::general_gamma_envelope) {
        r.require(f.gamma > 1.0, "steady", "profile", "general_gamma_envelope needs gamma > 1");
        r.require(s.envelope.c0 > 0.0, "steady", "envelope_c0", "envelope_c0 must be > 0");
        r.require(s.envelope.eps > 0.0 && s.envelope.eps < 1.0, "steady", "envelope_eps",
                  "envelope_eps must lie in (0, 1)");
    }
    r.require(s.tol > 0.0, "steady", "tol", "tol must be > 0");
    r.require(s.agree_tol > 0.0, "steady", "agree_tol", "agree_tol must be > 0");
    r.require(s.max_iter >= 1, "steady", "max_iter", "max_iter must be >= 1");

    auto& e = c.evolve;
    r.read("evolve", "delta", e.delta);
    std::string init = to_string(e.init);
    r.read("evolve", "init", init);
    if (init == "compensated")
        e.init = InitKind::compensated;
    else if (init == "density_only")
        e.init = InitKind::density_only;
    else if (init == "velocity_only")
        e.init = InitKind::velocity_only;
    else
        r.fail("evolve", "init", "expected compensated, density_only or velocity_only");
    r.read("evolve", "t_end", e.t_end);
    r.read_auto("evolve", "dt", e.dt);
    r.read("evolve", "output_stride", e.output_stride);
    r.read_auto("evolve", "sponge_width", e.sponge_width);
    r.read_auto("evolve", "sponge_rate", e.sponge_rate);
    r.read("evolve", "margin", e.margin);
    r.read("evolve", "nonlinear", e.options.nonlinear);
    r.read("evolve", "pressure", e.options.pressure);
    r.read("evolve", "coupling", e.options.coupling);
    r.read("evolve", "viscous", e.options.viscous);
    r.require(e.delta >= 0.0, "evolve", "delta", "delta must be >= 0");
    r.require(e.t_end > 0.0, "evolve", "t_end", "t_end must be > 0");
    r.require(!e.dt || *e.dt > 0.0, "evolve", "dt", "dt must be > 0 or auto");
    r.require(e.output_stride >= 1, "evolve", "output_stride", "output_stride must be >= 1");
    r.require(!e.sponge_width || (*e.sponge_width >= 0.0 && *e.sponge_width < d.r_outer - d.r_inner), "evolve",
              "sponge_width", "sponge_width must lie in [0, r_outer - r_inner)");
    r.require(!e.sponge_rate || *e.sponge_rate >= 0.0, "evolve", "sponge_rate", "sponge_rate must be >= 0 or auto");
    r.require(e.margin >= 1.0, "evolve", "margin", "margin must be >= 1");

    auto& q = c.ineqlab;
    auto& lab = q.lab;
    r.read("ineqlab", "r_inner", lab.r_inner);
    r.read("ineqlab", "r_outer", lab.r_outer);
    r.read("ineqlab", "nr", lab.nr);
    r.read("ineqlab", "ntheta", lab.ntheta);
    r.read("ineqlab", "nphi", lab.nphi);
    r.read("ineqlab", "seeds", lab.seeds);
    r.read("ineqlab", "scalars", lab.scalars);
    r.read("ineqlab", "modes", lab.modes);
    r.read("ineqlab", "seed", lab.seed);
    r.read("ineqlab", "pairing_allowance", lab.pairing_allowance);
    r.read("ineqlab", "radial_cells", lab.radial_cells);
    r.read("ineqlab", "radial_outer", lab.radial_outer);
    r.read("ineqlab", "refine", q.refine);
    r.read("ineqlab", "refined_pairing_allowance", q.refined_pairing_allowance);
    r.require(lab.r_inner > 0.0, "ineqlab", "r_inner", "r_inner must be > 0");
    r.require(lab.r_outer > lab.r_inner, "ineqlab", "r_outer", "r_outer must exceed r_inner");
    r.require(lab.nr >= 16, "ineqlab", "nr", "nr must be >= 16");
    r.require(lab.ntheta >= 8, "ineqlab", "ntheta", "ntheta must be >= 8");
    r.require(lab.nphi >= 8 && lab.nphi % 2 == 0, "ineqlab", "nphi", "nphi must be even and >= 8");
    r.require(lab.seeds >= 1, "ineqlab", "seeds", "seeds must be >= 1");
    r.require(lab.scalars >= 1, "ineqlab", "scalars", "scalars must be >= 1");
    r.require(lab.modes >= 1, "ineqlab", "modes", "modes must be >= 1");
    r.require(lab.pairing_allowance >= 0.0, "ineqlab", "pairing_allowance", "pairing_allowance must be >= 0");
    r.require(lab.radial_cells >= 8, "ineqlab", "radial_cells", "radial_cells must be >= 8");
    r.require(lab.radial_outer > 1.0, "ineqlab", "radial_outer", "radial_outer must be > 1");
    r.require(q.refined_pairing_allowance >= 0.0, "ineqlab", "refined_pairing_allowance",
              "refined_pairing_allowance must be >= 0");

    r.read("output", "dir", c.output.dir);
    r.read("output", "checkpoints", c.output.checkpoints);
    r.require(!c.output.dir.empty(), "output", "dir", "dir must not be empty");

    auto& w = c.sweep;
    r.read_list("sweep", "gamma", w.gamma);
    r.read_list("sweep", "delta", w.delta);
    r.read_list("sweep", "n_cells", w.n_cells);
    r.read_list("sweep", "r_outer", w.r_outer);
    for (double g : w.gamma) r.require(g >= 1.0, "sweep", "gamma", "gamma must be >= 1");
    for (double v : w.delta) r.require(v >= 0.0, "sweep", "delta", "delta must be >= 0");
    for (auto n : w.n_cells) r.require(n >= 8, "sweep", "n_cells", "n_cells must be >= 8");
    for (double v : w.r_outer) r.require(v > d.r_inner, "sweep", "r_outer", "r_outer must exceed r_inner");

    r.reject_unused();
    c.canonical = r.canonical();
    return c;
}

namespace detail {

inline void patch_canonical(Config& c, const std::string& key, const std::string& value) {
    const std::string head = key + " = ";
    const auto p = c.canonical.find(head);
    if (p == std::string::npos) throw InternalError("config: canonical text lacks " + key);
    const auto e = c.canonical.find('\n', p);
    c.canonical.replace(p + head.size(), e - p - head.size(), value);
}

} // namespace detail

/// Replaces the ineqlab seed and refreshes the canonical text.
inline void set_seed(Config& c, std::uint64_t seed) {
    c.ineqlab.lab.seed = seed;
    detail::patch_canonical(c, "ineqlab.seed", std::to_string(seed));
}

/// Copy of `c` at one point of the sweep.
inline Config sweep_point(const Config& c, double gamma, double delta, std::size_t n_cells, double r_outer) {
    Config j = c;
    j.fluid.gamma = gamma;
    j.evolve.delta = delta;
    j.domain.n_cells = n_cells;
    j.domain.r_outer = r_outer;
    detail::patch_canonical(j, "fluid.gamma", detail::format_number(gamma));
    detail::patch_canonical(j, "evolve.delta", detail::format_number(delta));
    detail::patch_canonical(j, "domain.n_cells", std::to_string(n_cells));
    detail::patch_canonical(j, "domain.r_outer", detail::format_number(r_outer));
    if (j.evolve.sponge_width && !(*j.evolve.sponge_width < r_outer - j.domain.r_inner))
        throw ParseError("config: key 'sponge_width' in [evolve]: sponge_width must lie in [0, r_outer - r_inner)");
    return j;
}

} // namespace nsp
