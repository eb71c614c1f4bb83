#include <cstdint>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "nsp/commands.hpp"

int main(int argc, char** argv) {
    CLI::App app{"Steady states, perturbation runs and inequality checks for the exterior Navier-Stokes-Poisson "
                 "system"};
    app.require_subcommand(1);

    nsp::RunConfig run;
    std::string config_path, out_dir;
    std::uint64_t seed = 0;

    const std::vector<std::pair<const char*, const char*>> subs{
        {"steady", "Solve the steady state and write profiles and certificates"},
        {"simulate", "Run a perturbation simulation and check the stability bound"},
        {"verify-inequalities", "Run the seeded functional-inequality ensembles"},
        {"sweep", "Run the Cartesian parameter sweep from the [sweep] section"}};
    for (const auto& [name, help] : subs) {
        auto* sub = app.add_subcommand(name, help);
        sub->add_option("--config", config_path, "Configuration file")->required();
        sub->add_option("--out", out_dir, "Output directory (overrides [output] dir)");
        sub->add_option("--set", run.overrides, "Override section.key=value (repeatable)");
        sub->add_option("--seed", seed, "Seed for all randomness (overrides [ineqlab] seed)");
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : nsp::exit_code::parse;
    }

    auto* sub = app.get_subcommands().front();
    run.subcommand = sub->get_name();
    run.config_path = config_path;
    if (sub->count("--out")) run.output_dir = out_dir;
    if (sub->count("--seed")) run.seed = seed;
    return nsp::run_command(run);
}
