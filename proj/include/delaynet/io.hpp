#pragma once

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "delaynet/ctcr.hpp"
#include "delaynet/errors.hpp"
#include "delaynet/simulator.hpp"
#include "delaynet/spectral.hpp"
#include "delaynet/topology.hpp"
#include "delaynet/version.hpp"

namespace delaynet {

/// Fixed numeric formatting keeps re-runs byte-identical.
inline std::string fmt_g(double v) {
    char b[40];
    std::snprintf(b, sizeof b, "%.12g", v);
    return b;
}

inline nlohmann::json load_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw InputError(path + ": " + e.what());
    }
    return j;
}

inline Topology load_topology(const std::string& path) {
    return Topology::from_json(load_json_file(path));
}

/// Formation scenario: desired offsets plus the gain and delay operating
/// point. Optional knobs (t_end, dt, v_init, box) tune the simulation.
struct Scenario {
    Eigen::MatrixXd offsets; // n x 2, centroid-relative meters
    Gains gains;
    DelayPair delays;
    double t_end = 300.0;
    double dt = 1e-2;
    double v_init = 0.5; // keep well above the linearization speed floor
    PoseBox box;
};

inline Scenario scenario_from_json(const nlohmann::json& j) {
    for (const char* key : {"offsets", "gains", "delays"})
        if (!j.contains(key))
            throw InputError(std::string("scenario json: missing field \"") + key + "\"");
    Scenario sc;
    const auto& offs = j.at("offsets");
    if (!offs.is_array() || offs.empty())
        throw InputError("scenario json: offsets must be a non-empty array of [dx,dy]");
    sc.offsets.resize(static_cast<long>(offs.size()), 2);
    for (size_t i = 0; i < offs.size(); ++i) {
        if (!offs[i].is_array() || offs[i].size() != 2)
            throw InputError("scenario json: each offset must be a [dx,dy] pair");
        sc.offsets(static_cast<long>(i), 0) = offs[i][0].get<double>();
        sc.offsets(static_cast<long>(i), 1) = offs[i][1].get<double>();
    }
    sc.gains.p = j.at("gains").value("p", 0.0);
    sc.gains.d = j.at("gains").value("d", 0.0);
    sc.delays.tau1 = j.at("delays").value("tau1", -1.0);
    sc.delays.tau2 = j.at("delays").value("tau2", -1.0);
    validate_gains(sc.gains);
    validate_delays(sc.delays);
    sc.t_end = j.value("t_end", sc.t_end);
    sc.dt = j.value("dt", sc.dt);
    sc.v_init = j.value("v_init", sc.v_init);
    if (j.contains("box")) {
        const auto& b = j.at("box");
        if (!b.is_array() || b.size() != 2 || !(b[1].get<double>() > b[0].get<double>()))
            throw InputError("scenario json: box must be [lo, hi] with hi > lo");
        sc.box.x_lo = sc.box.y_lo = b[0].get<double>();
        sc.box.x_hi = sc.box.y_hi = b[1].get<double>();
    }
    if (!(sc.t_end > 0.0) || !(sc.dt > 0.0) || sc.v_init < 0.0)
        throw InputError("scenario json: t_end and dt must be positive, v_init non-negative");
    return sc;
}

inline Scenario load_scenario(const std::string& path) {
    return scenario_from_json(load_json_file(path));
}

inline void ensure_dir(const std::string& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw InputError("cannot create directory " + dir + ": " + ec.message());
}

inline std::ofstream open_out(const std::string& path) {
    std::ofstream out(path);
    if (!out) throw InputError("cannot write " + path);
    return out;
}

inline void write_curves_csv(std::ostream& os, const std::vector<Curve>& curves) {
    os << "factor_index,kind,omega,tau1,tau2,rt1,rt2\n";
    for (const auto& c : curves) {
        const char* kind = c.kind == CurveKind::Kernel ? "kernel" : "offspring";
        for (const auto& p : c.points)
            os << c.factor_index << ',' << kind << ',' << fmt_g(p.omega) << ',' << fmt_g(p.tau1)
               << ',' << fmt_g(p.tau2) << ',' << p.rt1 << ',' << p.rt2 << '\n';
    }
}

inline void write_region_csv(std::ostream& os, const StabilityMap& map) {
    os << "tau1,tau2,nu\n";
    const double h = map.cell();
    for (int j = 0; j < map.resolution; ++j)
        for (int i = 0; i < map.resolution; ++i)
            os << fmt_g((i + 0.5) * h) << ',' << fmt_g((j + 0.5) * h) << ','
               << map.nu[static_cast<size_t>(j) * map.resolution + i] << '\n';
}

inline nlohmann::ordered_json polylines_json(
    const std::vector<std::vector<std::array<double, 2>>>& lines) {
    auto arr = nlohmann::ordered_json::array();
    for (const auto& line : lines) {
        auto jl = nlohmann::ordered_json::array();
        for (const auto& pt : line) jl.push_back({pt[0], pt[1]});
        arr.push_back(std::move(jl));
    }
    return arr;
}

inline void write_boundary_json(std::ostream& os, const StabilityMap& map) {
    nlohmann::ordered_json j;
    j["tau_max"] = map.tau_max;
    j["resolution"] = map.resolution;
    j["stable_fraction"] = map.stable_fraction();
    j["stable_boundary"] = polylines_json(map.stable_boundary());
    os << j.dump(2) << '\n';
}

inline void write_surface_csv(std::ostream& os, const AbscissaSurface& surf) {
    os << "tau1,tau2,sigma\n";
    const double h = surf.cell();
    for (int j = 0; j < surf.resolution; ++j)
        for (int i = 0; i < surf.resolution; ++i)
            os << fmt_g((i + 0.5) * h) << ',' << fmt_g((j + 0.5) * h) << ','
               << fmt_g(surf.sigma[static_cast<size_t>(j) * surf.resolution + i]) << '\n';
}

inline void write_contours_json(std::ostream& os, const AbscissaSurface& surf,
                                const std::vector<double>& levels) {
    nlohmann::ordered_json j;
    j["tau_max"] = surf.tau_max;
    j["resolution"] = surf.resolution;
    auto arr = nlohmann::ordered_json::array();
    for (double level : levels) {
        nlohmann::ordered_json entry;
        entry["level"] = level;
        entry["lines"] = polylines_json(contour_polylines(surf.sigma, surf.resolution,
                                                          surf.cell(), level));
        arr.push_back(std::move(entry));
    }
    j["contours"] = std::move(arr);
    os << j.dump(2) << '\n';
}

inline void write_trace_csv(std::ostream& os, const SimTrace& trace) {
    os << 't';
    for (int i = 1; i <= trace.n; ++i) {
        if (trace.model == Model::Linear)
            os << ",x" << i << ",vx" << i << ",y" << i << ",vy" << i;
        else
            os << ",x" << i << ",y" << i << ",theta" << i << ",v" << i;
    }
    os << '\n';
    for (long r = 0; r < trace.states.rows(); ++r) {
        os << fmt_g(trace.t[static_cast<size_t>(r)]);
        for (long c = 0; c < trace.states.cols(); ++c) os << ',' << fmt_g(trace.states(r, c));
        os << '\n';
    }
}

/// Everything needed to reproduce a run: command, parameters, input files,
/// output files. Written next to the outputs as manifest.json.
struct RunManifest {
    std::string command;
    nlohmann::ordered_json parameters = nlohmann::ordered_json::object();
    std::vector<std::string> inputs;
    std::vector<std::string> outputs;
};

inline void write_manifest(std::ostream& os, const RunManifest& m) {
    nlohmann::ordered_json j;
    j["tool"] = "delaynet";
    j["version"] = kVersion;
    j["command"] = m.command;
    j["parameters"] = m.parameters;
    j["inputs"] = m.inputs;
    j["outputs"] = m.outputs;
    os << j.dump(2) << '\n';
}

} // namespace delaynet
