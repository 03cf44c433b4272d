#pragma once

#include <cstdint>
#include <iostream>
#include <string>
#include <vector>

#include "delaynet/ctcr.hpp"
#include "delaynet/errors.hpp"
#include "delaynet/formation.hpp"
#include "delaynet/io.hpp"
#include "delaynet/quasipoly.hpp"
#include "delaynet/simulator.hpp"
#include "delaynet/spectral.hpp"
#include "delaynet/spectrum.hpp"
#include "delaynet/topology.hpp"

namespace delaynet {
namespace cli {

constexpr int kExitOk = 0;
constexpr int kExitInput = 1;
constexpr int kExitNumerical = 2;
constexpr int kExitInstability = 3;

/// Map the library's exception taxonomy to process exit codes.
template <typename Fn> int run_guarded(std::ostream& log, Fn&& fn) {
    try {
        fn();
        return kExitOk;
    } catch (const InputError& e) {
        log << "error: " << e.what() << '\n';
        return kExitInput;
    } catch (const DivergenceError& e) {
        log << "error: " << e.what() << '\n';
        return kExitInstability;
    } catch (const NumericalError& e) {
        log << "error: " << e.what() << '\n';
        return kExitNumerical;
    } catch (const std::exception& e) {
        log << "error: " << e.what() << '\n';
        return kExitNumerical;
    }
}

inline nlohmann::ordered_json gains_json(const Gains& g) {
    return {{"p", g.p}, {"d", g.d}};
}

inline nlohmann::ordered_json delays_json(const DelayPair& d) {
    return {{"tau1", d.tau1}, {"tau2", d.tau2}};
}

struct AnalyzeArgs {
    std::string topology_path;
    std::string out_dir = "out";
};

inline int cmd_analyze(const AnalyzeArgs& args, std::ostream& log) {
    return run_guarded(log, [&] {
        const Topology topo = load_topology(args.topology_path);
        const Eigen::MatrixXd c = build_c_matrix(topo);
        const bool tree = has_spanning_tree(topo);
        if (!tree)
            log << "warning: no directed spanning tree; consensus is not guaranteed\n";
        const Spectrum sp = spectrum(c);

        log << "agents: " << sp.n() << "\n";
        log << "second-order factors: " << sp.ell << ", fourth-order factors: " << sp.m << "\n";
        log << "eigenvalues:\n";
        nlohmann::ordered_json jeig = nlohmann::ordered_json::array();
        for (int i = 0; i < sp.factor_count(); ++i) {
            const Complex lam = sp.eigenvalues[static_cast<size_t>(i)];
            log << "  " << fmt_g(lam.real());
            if (sp.is_pair(i)) log << " +/- " << fmt_g(std::abs(lam.imag())) << "i";
            log << (i == 0 ? "  (centroid)" : "") << "\n";
            jeig.push_back({lam.real(), lam.imag()});
            if (sp.is_pair(i)) jeig.push_back({lam.real(), -lam.imag()});
        }

        ensure_dir(args.out_dir);
        nlohmann::ordered_json j;
        j["n"] = sp.n();
        j["spanning_tree"] = tree;
        j["ell"] = sp.ell;
        j["m"] = sp.m;
        j["eigenvalues"] = std::move(jeig);
        auto jf = nlohmann::ordered_json::array();
        const std::vector<Factor> factors = factorize(sp, Gains{1.0, 1.0});
        for (const Factor& f : factors) {
            nlohmann::ordered_json e;
            e["index"] = f.index;
            e["order"] = f.kind == FactorKind::SecondOrder ? 2 : 4;
            e["lambda"] = {f.lambda.real(), f.lambda.imag()};
            e["centroid"] = f.is_centroid;
            jf.push_back(std::move(e));
        }
        j["factors"] = std::move(jf);
        open_out(args.out_dir + "/analysis.json") << j.dump(2) << '\n';

        RunManifest man;
        man.command = "analyze";
        man.parameters["topology"] = args.topology_path;
        man.parameters["out_dir"] = args.out_dir;
        man.inputs = {args.topology_path};
        man.outputs = {args.out_dir + "/analysis.json", args.out_dir + "/manifest.json"};
        auto os = open_out(args.out_dir + "/manifest.json");
        write_manifest(os, man);
    });
}

struct StabilityArgs {
    std::string topology_path;
    Gains gains{1.0, 0.5};
    double tau_max = 8.0;
    int resolution = 400;
    std::string out_dir = "out";
};

inline int cmd_stability(const StabilityArgs& args, std::ostream& log) {
    return run_guarded(log, [&] {
        const Topology topo = load_topology(args.topology_path);
        const Eigen::MatrixXd c = build_c_matrix(topo);
        if (!has_spanning_tree(topo))
            log << "warning: no directed spanning tree; consensus is not guaranteed\n";
        const Spectrum sp = spectrum(c);
        const std::vector<Factor> factors = factorize(sp, args.gains);
        const StabilityMap map = stability_map(factors, args.tau_max, args.resolution);

        ensure_dir(args.out_dir);
        {
            auto os = open_out(args.out_dir + "/curves.csv");
            write_curves_csv(os, map.curves);
        }
        {
            auto os = open_out(args.out_dir + "/region.csv");
            write_region_csv(os, map);
        }
        {
            auto os = open_out(args.out_dir + "/boundary.json");
            write_boundary_json(os, map);
        }
        RunManifest man;
        man.command = "stability";
        man.parameters["topology"] = args.topology_path;
        man.parameters["gains"] = gains_json(args.gains);
        man.parameters["tau_max"] = args.tau_max;
        man.parameters["resolution"] = args.resolution;
        man.parameters["out_dir"] = args.out_dir;
        man.inputs = {args.topology_path};
        man.outputs = {args.out_dir + "/curves.csv", args.out_dir + "/region.csv",
                       args.out_dir + "/boundary.json", args.out_dir + "/manifest.json"};
        auto os = open_out(args.out_dir + "/manifest.json");
        write_manifest(os, man);

        log << "kernel families: " << map.kernel_family_count << "\n";
        log << "stable area fraction: " << fmt_g(map.stable_fraction()) << "\n";
    });
}

struct SimulateArgs {
    std::string topology_path;
    std::string scenario_path;
    std::string model = "unicycle";
    std::uint64_t seed = 1;
    std::string out_dir = "out";
};

inline int cmd_simulate(const SimulateArgs& args, std::ostream& log) {
    return run_guarded(log, [&] {
        if (args.model != "linear" && args.model != "unicycle")
            throw InputError("simulate: model must be linear or unicycle");
        const Topology topo = load_topology(args.topology_path);
        const Eigen::MatrixXd c = build_c_matrix(topo);
        if (!has_spanning_tree(topo))
            log << "warning: no directed spanning tree; consensus is not guaranteed\n";
        const Scenario sc = load_scenario(args.scenario_path);
        if (sc.offsets.rows() != topo.n)
            throw InputError("simulate: scenario offsets count does not match the topology");
        const Spectrum sp = spectrum(c);
        const std::vector<Factor> factors = factorize(sp, sc.gains);

        try {
            const int nu = count_rhp_roots(factors, sc.delays);
            if (nu > 0)
                log << "warning: delays (" << fmt_g(sc.delays.tau1) << ", "
                    << fmt_g(sc.delays.tau2) << ") are outside the stable region (NU = " << nu
                    << "); the run may diverge\n";
        } catch (const NumericalError& e) {
            log << "warning: stability pre-check failed (" << e.what() << "); continuing\n";
        }

        const FormationSpec fs = design_formation(sp, sc.gains, sc.offsets);
        const Eigen::MatrixXd poses = random_poses(topo.n, args.seed, sc.box, sc.v_init);
        const Eigen::MatrixXd z0 = linear_state_from_poses(poses);

        SimConfig cfg;
        cfg.dt = sc.dt;
        cfg.t_end = sc.t_end;

        bool have_prediction = true;
        Eigen::MatrixXd predicted;
        try {
            predicted = predict_final_positions(sp, sc.gains, sc.delays, fs.force, z0);
        } catch (const InputError& e) {
            have_prediction = false;
            log << "note: no settle prediction (" << e.what() << ")\n";
        }

        const SimTrace trace = args.model == "linear"
                                   ? simulate_linear(c, sc.gains, sc.delays, fs.force, z0, cfg)
                                   : simulate_unicycle(c, sc.gains, sc.delays, fs.force, poses,
                                                       cfg);

        double radius = 1.0;
        for (int i = 0; i < sc.offsets.rows(); ++i)
            radius = std::max(radius, sc.offsets.row(i).norm());
        std::optional<double> settle;
        if (have_prediction) settle = settle_time(trace, predicted, 0.01 * radius);

        ensure_dir(args.out_dir);
        {
            auto os = open_out(args.out_dir + "/trace.csv");
            write_trace_csv(os, trace);
        }
        nlohmann::ordered_json run;
        run["model"] = args.model;
        run["seed"] = args.seed;
        run["gains"] = gains_json(sc.gains);
        run["delays"] = delays_json(sc.delays);
        run["dt"] = trace.dt;
        run["t_end"] = sc.t_end;
        run["v_init"] = sc.v_init;
        run["settle_tolerance"] = 0.01 * radius;
        if (settle)
            run["settle_time"] = *settle;
        else
            run["settle_time"] = nullptr;
        run["guard_events"] = trace.guard_events;
        if (have_prediction) {
            auto jp = nlohmann::ordered_json::array();
            for (int i = 0; i < predicted.rows(); ++i)
                jp.push_back({predicted(i, 0), predicted(i, 1)});
            run["predicted_final"] = std::move(jp);
        }
        open_out(args.out_dir + "/run.json") << run.dump(2) << '\n';

        RunManifest man;
        man.command = "simulate";
        man.parameters["topology"] = args.topology_path;
        man.parameters["scenario"] = args.scenario_path;
        man.parameters["model"] = args.model;
        man.parameters["seed"] = args.seed;
        man.parameters["out_dir"] = args.out_dir;
        man.inputs = {args.topology_path, args.scenario_path};
        man.outputs = {args.out_dir + "/trace.csv", args.out_dir + "/run.json",
                       args.out_dir + "/manifest.json"};
        auto os = open_out(args.out_dir + "/manifest.json");
        write_manifest(os, man);

        if (settle)
            log << "settled at t = " << fmt_g(*settle) << " s\n";
        else
            log << "did not settle within the horizon\n";
    });
}

struct SurfaceArgs {
    std::string topology_path;
    Gains gains{1.0, 0.5};
    double tau_max = 8.0;
    int resolution = 100;
    std::string out_dir = "out";
};

inline int cmd_surface(const SurfaceArgs& args, std::ostream& log) {
    return run_guarded(log, [&] {
        const Topology topo = load_topology(args.topology_path);
        const Eigen::MatrixXd c = build_c_matrix(topo);
        const Spectrum sp = spectrum(c);
        const std::vector<Factor> factors = factorize(sp, args.gains);
        const AbscissaSurface surf = abscissa_surface(factors, args.tau_max, args.resolution);

        ensure_dir(args.out_dir);
        {
            auto os = open_out(args.out_dir + "/surface.csv");
            write_surface_csv(os, surf);
        }
        {
            auto os = open_out(args.out_dir + "/contours.json");
            write_contours_json(os, surf, {0.0, -0.05, -0.1});
        }
        RunManifest man;
        man.command = "surface";
        man.parameters["topology"] = args.topology_path;
        man.parameters["gains"] = gains_json(args.gains);
        man.parameters["tau_max"] = args.tau_max;
        man.parameters["resolution"] = args.resolution;
        man.parameters["out_dir"] = args.out_dir;
        man.inputs = {args.topology_path};
        man.outputs = {args.out_dir + "/surface.csv", args.out_dir + "/contours.json",
                       args.out_dir + "/manifest.json"};
        auto os = open_out(args.out_dir + "/manifest.json");
        write_manifest(os, man);

        size_t best = 0;
        for (size_t i = 1; i < surf.sigma.size(); ++i)
            if (surf.sigma[i] < surf.sigma[best]) best = i;
        const double h = surf.cell();
        const int bi = static_cast<int>(best) % surf.resolution;
        const int bj = static_cast<int>(best) / surf.resolution;
        log << "fastest cell: tau1 = " << fmt_g((bi + 0.5) * h) << ", tau2 = "
            << fmt_g((bj + 0.5) * h) << ", sigma = " << fmt_g(surf.sigma[best]) << "\n";
    });
}

} // namespace cli
} // namespace delaynet
