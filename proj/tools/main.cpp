#include <cstdint>
#include <cstdio>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "delaynet/cli.hpp"
#include "delaynet/version.hpp"

namespace {

delaynet::Gains parse_gains(const std::string& text) {
    double p = 0.0, d = 0.0;
    char tail = '\0';
    if (std::sscanf(text.c_str(), "%lf,%lf%c", &p, &d, &tail) != 2)
        throw delaynet::InputError("--gains expects P,D (example: 1,0.5)");
    return delaynet::Gains{p, d};
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Exact delay-stability analysis, formation design and simulation "
                 "for PD consensus networks under two communication delays"};
    app.set_version_flag("--version", delaynet::kVersion);
    app.require_subcommand(1);

    std::string topology;
    std::string scenario;
    std::string gains_text = "1,0.5";
    std::string model = "unicycle";
    std::string out_dir = "out";
    double tau_max = 8.0;
    int resolution = 0; // 0: per-command default
    std::uint64_t seed = 1;

    auto add_common = [&](CLI::App* cmd, bool needs_scenario) {
        cmd->add_option("--topology", topology, "topology JSON file")->required();
        if (needs_scenario)
            cmd->add_option("--scenario", scenario, "scenario JSON file")->required();
        cmd->add_option("--out-dir", out_dir, "output directory");
    };

    CLI::App* analyze = app.add_subcommand("analyze", "report the consensus spectrum and factors");
    add_common(analyze, false);

    CLI::App* stability = app.add_subcommand("stability", "build the delay-plane stability map");
    add_common(stability, false);
    stability->add_option("--gains", gains_text, "P,D gains");
    stability->add_option("--tau-max", tau_max, "delay window edge");
    stability->add_option("--resolution", resolution, "grid cells per axis");

    CLI::App* simulate = app.add_subcommand("simulate", "integrate the closed loop");
    add_common(simulate, true);
    simulate->add_option("--model", model, "linear or unicycle");
    simulate->add_option("--seed", seed, "initial-pose seed");

    CLI::App* surface = app.add_subcommand("surface", "dominant-root surface over the delays");
    add_common(surface, false);
    surface->add_option("--gains", gains_text, "P,D gains");
    surface->add_option("--tau-max", tau_max, "delay window edge");
    surface->add_option("--resolution", resolution, "grid cells per axis");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : delaynet::cli::kExitInput;
    }

    try {
        if (analyze->parsed()) {
            delaynet::cli::AnalyzeArgs a;
            a.topology_path = topology;
            a.out_dir = out_dir;
            return delaynet::cli::cmd_analyze(a, std::cout);
        }
        if (stability->parsed()) {
            delaynet::cli::StabilityArgs a;
            a.topology_path = topology;
            a.gains = parse_gains(gains_text);
            a.tau_max = tau_max;
            a.resolution = resolution > 0 ? resolution : 400;
            a.out_dir = out_dir;
            return delaynet::cli::cmd_stability(a, std::cout);
        }
        if (simulate->parsed()) {
            delaynet::cli::SimulateArgs a;
            a.topology_path = topology;
            a.scenario_path = scenario;
            a.model = model;
            a.seed = seed;
            a.out_dir = out_dir;
            return delaynet::cli::cmd_simulate(a, std::cout);
        }
        delaynet::cli::SurfaceArgs a;
        a.topology_path = topology;
        a.gains = parse_gains(gains_text);
        a.tau_max = tau_max;
        a.resolution = resolution > 0 ? resolution : 100;
        a.out_dir = out_dir;
        return delaynet::cli::cmd_surface(a, std::cout);
    } catch (const delaynet::InputError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return delaynet::cli::kExitInput;
    }
}
