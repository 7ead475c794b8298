#include "swarm_nmpc/cli.hpp"

#include <CLI11.hpp>

#include <iostream>

int main(int argc, char** argv) {
    using namespace swarm_nmpc;

    CLI::App app{"Decentralized robust NMPC multi-agent navigation simulator"};
    app.set_version_flag("--version", kVersion);
    app.require_subcommand(1);

    bool quiet = false;
    app.add_flag("--quiet", quiet, "suppress progress output");
    app.fallthrough();

    std::string scenario_path;
    std::string output_dir = "out";
    std::uint64_t seed = 0;
    bool have_seed = false;
    bool strict = false;
    bool diagnostic = false;

    CLI::App* run = app.add_subcommand("run", "execute a scenario and write artifacts");
    run->fallthrough();
    run->add_option("scenario", scenario_path, "scenario file")->required();
    run->add_option("--output", output_dir, "output directory");
    run->add_option("--seed", seed, "override the scenario seed")->each([&](const std::string&) {
        have_seed = true;
    });
    run->add_flag("--strict", strict, "halt on any realized constraint violation");
    run->add_flag("--diagnostic", diagnostic, "record violations and continue");

    CLI::App* check = app.add_subcommand("check", "static feasibility and theorem reports");
    check->fallthrough();
    check->add_option("scenario", scenario_path, "scenario file")->required();

    std::string parameter;
    std::string values_text;
    CLI::App* sweep = app.add_subcommand("sweep", "run a scalar parameter grid");
    sweep->fallthrough();
    sweep->add_option("scenario", scenario_path, "scenario file")->required();
    sweep->add_option("--param", parameter, "dotted field path, e.g. agents.w_max")->required();
    sweep->add_option("--values", values_text, "comma-separated grid values")->required();
    sweep->add_option("--output", output_dir, "output directory");
    sweep->add_option("--seed", seed, "override the scenario seed")->each([&](const std::string&) {
        have_seed = true;
    });
    sweep->add_flag("--strict", strict, "halt runs on realized violations");
    sweep->add_flag("--diagnostic", diagnostic, "record violations and continue");

    CLI11_PARSE(app, argc, argv);

    if (strict && diagnostic) {
        std::cerr << "error: --strict and --diagnostic are mutually exclusive\n";
        return kExitParseError;
    }
    std::optional<SimMode> mode_override;
    if (strict) mode_override = SimMode::strict;
    if (diagnostic) mode_override = SimMode::diagnostic;
    std::optional<std::uint64_t> seed_override;
    if (have_seed) seed_override = seed;

    if (run->parsed()) {
        RunOptions options;
        options.scenario_path = scenario_path;
        options.output_dir = output_dir;
        options.seed_override = seed_override;
        options.mode_override = mode_override;
        options.quiet = quiet;
        return cmd_run(options, std::cout, std::cerr);
    }
    if (check->parsed()) {
        CheckOptions options;
        options.scenario_path = scenario_path;
        options.quiet = quiet;
        return cmd_check(options, std::cout, std::cerr);
    }

    SweepOptions options;
    options.scenario_path = scenario_path;
    options.parameter = parameter;
    options.output_dir = output_dir;
    options.seed_override = seed_override;
    options.mode_override = mode_override;
    options.quiet = quiet;
    std::stringstream ss(values_text);
    std::string token;
    while (std::getline(ss, token, ',')) {
        if (!token.empty()) options.values.push_back(std::stod(token));
    }
    return cmd_sweep(options, std::cout, std::cerr);
}
