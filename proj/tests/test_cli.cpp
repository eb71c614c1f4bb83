#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "nsp/commands.hpp"

using namespace nsp;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const std::string kQuick = R"([fluid]
gamma = 2.0

[domain]
r_inner = 1.0
r_outer = 8.0
n_cells = 200

[evolve]
delta = 1e-3
t_end = 0.5
output_stride = 10
)";

const std::string kSmallIneq = R"(
[ineqlab]
nr = 16
ntheta = 8
nphi = 8
seeds = 6
scalars = 3
radial_cells = 64
)";

fs::path scratch(const std::string& name) {
    const auto p = fs::temp_directory_path() / ("nsp_cli_test_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

json load_json(const fs::path& p) { return json::parse(slurp(p)); }

int run(const std::string& sub, const fs::path& dir, const std::string& text, std::vector<std::string> overrides = {},
        std::optional<std::uint64_t> seed = {}) {
    const auto cfg = dir / "run.cfg";
    std::ofstream(cfg) << text;
    RunConfig rc;
    rc.subcommand = sub;
    rc.config_path = cfg;
    rc.output_dir = dir / "out";
    rc.overrides = std::move(overrides);
    rc.seed = seed;
    std::ostringstream log, err;
    return run_command(rc, log, err);
}

struct Csv {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    std::size_t col(const std::string& name) const {
        for (std::size_t i = 0; i < header.size(); ++i)
            if (header[i] == name) return i;
        throw std::out_of_range(name);
    }
};

Csv read_csv(const fs::path& p) {
    Csv c;
    std::ifstream in(p);
    std::string line;
    auto split = [](const std::string& s) {
        std::vector<std::string> out;
        std::stringstream ss(s);
        std::string cell;
        while (std::getline(ss, cell, ',')) out.push_back(cell);
        if (!s.empty() && s.back() == ',') out.emplace_back();
        return out;
    };
    std::getline(in, line);
    c.header = split(line);
    while (std::getline(in, line)) c.rows.push_back(split(line));
    return c;
}

} // namespace

TEST(Cli, SteadyConstantProfileIsFlat) {
    const auto d = scratch("steady_const");
    EXPECT_EQ(run("steady", d, kQuick, {"steady.profile=constant"}), exit_code::ok);
    const auto csv = read_csv(d / "out" / "rho_tilde.csv");
    ASSERT_EQ(csv.header, (std::vector<std::string>{"r", "value"}));
    ASSERT_EQ(csv.rows.size(), 201u);
    for (const auto& row : csv.rows) EXPECT_NEAR(std::stod(row[1]), 1.0, 1e-9);
}

TEST(Cli, SteadyBumpCertificates) {
    const auto d = scratch("steady_bump");
    EXPECT_EQ(run("steady", d, kQuick, {"steady.amplitude=0.5"}), exit_code::ok);
    const auto j = load_json(d / "out" / "certificate.json");
    EXPECT_TRUE(j["bounds"]["pass"].get<bool>());
    EXPECT_TRUE(j["certificates"]["super"]["pass"].get<bool>());
    EXPECT_TRUE(j["certificates"]["sub"]["pass"].get<bool>());
    EXPECT_EQ(j["verdict"], "PASS");
    EXPECT_EQ(j["regularity"]["grad_rho"].size(), 3u);
    EXPECT_TRUE(fs::exists(d / "out" / "phi_tilde.csv"));
    EXPECT_TRUE(fs::exists(d / "out" / "b.csv"));
}

TEST(Cli, SteadyAmplitudeOutOfRangeIsParseError) {
    const auto d = scratch("steady_amp");
    EXPECT_EQ(run("steady", d, kQuick, {"steady.amplitude=1.5"}), exit_code::parse);
}

TEST(Cli, SimulateZeroDelta) {
    const auto d = scratch("sim_zero");
    EXPECT_EQ(run("simulate", d, kQuick, {"evolve.delta=0"}), exit_code::ok);
    const auto csv = read_csv(d / "out" / "timeseries.csv");
    EXPECT_EQ(csv.header, (std::vector<std::string>{"t", "E", "D", "D_no_qtt", "mass", "E_basic", "identity_residual",
                                                     "min_density"}));
    ASSERT_GT(csv.rows.size(), 2u);
    for (const auto& row : csv.rows) EXPECT_LE(std::stod(row[csv.col("E")]), 1e-12);
    const auto j = load_json(d / "out" / "summary.json");
    EXPECT_EQ(j["verdict"], "PASS");
}

TEST(Cli, SimulateRecordsVerdictAndSeed) {
    const auto d = scratch("sim_verdict");
    EXPECT_EQ(run("simulate", d, kQuick, {}, 99), exit_code::ok);
    const auto j = load_json(d / "out" / "summary.json");
    EXPECT_EQ(j["verdict"], "PASS");
    EXPECT_EQ(j["seed"].get<std::uint64_t>(), 99u);
    EXPECT_TRUE(j.contains("sup_ratio"));
    EXPECT_TRUE(j["timestamp"].contains("elapsed_s"));
    EXPECT_NE(slurp(d / "out" / "config.resolved").find("ineqlab.seed = 99"), std::string::npos);
}

TEST(Cli, SimulateVacuumAborts) {
    const auto d = scratch("sim_vacuum");
    EXPECT_EQ(run("simulate", d, kQuick, {"evolve.delta=1e6"}), exit_code::runtime);
    const auto j = load_json(d / "out" / "summary.json");
    ASSERT_TRUE(j["failure"].is_object());
    EXPECT_EQ(j["failure"]["kind"], "vacuum");
    EXPECT_TRUE(j["failure"]["t"].is_number());
}

TEST(Cli, SimulateCheckpoints) {
    const auto d = scratch("sim_ckpt");
    EXPECT_EQ(run("simulate", d, kQuick, {"output.checkpoints=true"}), exit_code::ok);
    const auto dir = d / "out" / "checkpoints";
    ASSERT_TRUE(fs::exists(dir / "state_0.txt"));
    ASSERT_TRUE(fs::exists(dir / "state_10.txt"));
    std::ifstream in(dir / "state_0.txt");
    std::string header;
    std::getline(in, header);
    EXPECT_EQ(header, "r q u phi");
    const auto rows = read_csv(d / "out" / "timeseries.csv").rows.size();
    std::size_t files = 0;
    for ([[maybe_unused]] const auto& e : fs::directory_iterator(dir)) ++files;
    EXPECT_EQ(files, rows);
}

TEST(Cli, VerifyInequalitiesSmallEnsemble) {
    const auto d = scratch("ineq");
    EXPECT_EQ(run("verify-inequalities", d, kQuick + kSmallIneq), exit_code::ok);
    const auto j = load_json(d / "out" / "inequalities.json");
    ASSERT_EQ(j["blocks"].size(), 6u);
    bool found = false;
    for (const auto& b : j["blocks"])
        if (b["id"] == "boundary_pairing") {
            found = true;
            EXPECT_EQ(b["verdict"], "PASS");
        }
    EXPECT_TRUE(found);
    EXPECT_EQ(read_csv(d / "out" / "inequalities.csv").rows.size(), 6u);
}

TEST(Cli, VerifyInequalitiesDeterministic) {
    const auto a = scratch("ineq_a");
    const auto b = scratch("ineq_b");
    EXPECT_EQ(run("verify-inequalities", a, kQuick + kSmallIneq, {"ineqlab.refine=true"}, 5), exit_code::ok);
    EXPECT_EQ(run("verify-inequalities", b, kQuick + kSmallIneq, {"ineqlab.refine=true"}, 5), exit_code::ok);
    auto ja = load_json(a / "out" / "inequalities.json");
    auto jb = load_json(b / "out" / "inequalities.json");
    ja.erase("timestamp");
    jb.erase("timestamp");
    EXPECT_EQ(ja.dump(2), jb.dump(2));
    EXPECT_EQ(slurp(a / "out" / "inequalities.csv"), slurp(b / "out" / "inequalities.csv"));
    EXPECT_TRUE(ja["blocks"][0].contains("refined"));

    const auto c = scratch("ineq_c");
    EXPECT_EQ(run("verify-inequalities", c, kQuick + kSmallIneq, {"ineqlab.refine=true"}, 6), exit_code::ok);
    EXPECT_NE(slurp(a / "out" / "inequalities.csv"), slurp(c / "out" / "inequalities.csv"));
}

TEST(Cli, VerifyInequalitiesCoarseThetaRejected) {
    const auto d = scratch("ineq_theta");
    EXPECT_NE(run("verify-inequalities", d, kQuick + kSmallIneq, {"ineqlab.ntheta=4"}), exit_code::ok);
}

TEST(Cli, SingleSweepMatchesSimulate) {
    const auto s = scratch("sweep_single_sim");
    const auto w = scratch("sweep_single");
    EXPECT_EQ(run("simulate", s, kQuick), exit_code::ok);
    EXPECT_EQ(run("sweep", w, kQuick + "[sweep]\ndelta = 1e-3\n"), exit_code::ok);
    auto js = load_json(s / "out" / "summary.json");
    auto jw = load_json(w / "out" / "run_000" / "summary.json");
    js.erase("timestamp");
    jw.erase("timestamp");
    EXPECT_EQ(js.dump(2), jw.dump(2));
    EXPECT_EQ(slurp(s / "out" / "timeseries.csv"), slurp(w / "out" / "run_000" / "timeseries.csv"));

    const auto csv = read_csv(w / "out" / "sweep.csv");
    ASSERT_EQ(csv.rows.size(), 1u);
    EXPECT_EQ(std::stod(csv.rows[0][csv.col("sup_ratio")]), js["sup_ratio"].get<double>());
    EXPECT_EQ(csv.rows[0][csv.col("verdict")], "PASS");
}

TEST(Cli, SweepAmplitudeAndResolution) {
    const auto w = scratch("sweep_grid");
    ::setenv("NSP_THREADS", "2", 1);
    EXPECT_EQ(run("sweep", w, kQuick + "[sweep]\ndelta = 1e-4, 1e-3\nn_cells = 200, 400\n"), exit_code::ok);
    ::unsetenv("NSP_THREADS");
    const auto csv = read_csv(w / "out" / "sweep.csv");
    ASSERT_EQ(csv.rows.size(), 4u);
    auto val = [&](std::size_t row, const char* col) { return std::stod(csv.rows[row][csv.col(col)]); };
    // rows are ordered delta-major, then n_cells
    EXPECT_EQ(val(0, "delta"), 1e-4);
    EXPECT_EQ(val(1, "n_cells"), 400.0);
    for (std::size_t k = 0; k < 2; ++k) {
        const double lo = val(k, "sup_ratio"), hi = val(k + 2, "sup_ratio");
        EXPECT_LT(std::abs(hi - lo) / lo, 0.3);
    }
    const double drop = val(0, "steady_residual") / val(1, "steady_residual");
    EXPECT_GT(drop, 3.5);
    EXPECT_LT(drop, 4.5);
    for (std::size_t k = 0; k < 4; ++k)
        EXPECT_TRUE(fs::exists(w / "out" / ("run_00" + std::to_string(k)) / "timeseries.csv"));
}

TEST(Cli, InvalidThreadCountIsParseError) {
    const auto w = scratch("sweep_threads");
    ::setenv("NSP_THREADS", "zero", 1);
    EXPECT_EQ(run("sweep", w, kQuick), exit_code::parse);
    ::unsetenv("NSP_THREADS");
}

TEST(Cli, MissingConfigAndUnknownSubcommand) {
    RunConfig rc;
    rc.subcommand = "simulate";
    rc.config_path = "/nonexistent/run.cfg";
    std::ostringstream log, err;
    EXPECT_EQ(run_command(rc, log, err), exit_code::parse);
    const auto d = scratch("unknown_sub");
    EXPECT_EQ(run("plot", d, kQuick), exit_code::parse);
}
