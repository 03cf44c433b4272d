// Acceptance gate: every release-blocking behavior in one binary, one
// pass/fail line per criterion. Exit code is the number of failures.

#include <chrono>
#include <cmath>
#include <complex>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "delaynet/cli.hpp"
#include "oracles.hpp"

using namespace delaynet;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Check {
    std::string bad;
    void expect(bool cond, const std::string& msg) {
        if (cond) return;
        if (!bad.empty()) bad += "; ";
        bad += msg;
    }
};

// artifacts shared between criteria
std::unique_ptr<Topology> g_topo;
Eigen::MatrixXd g_c;
std::unique_ptr<Spectrum> g_sp;
std::vector<Factor> g_factors;
std::unique_ptr<StabilityMap> g_map;

int g_failures = 0;

template <typename Fn> void criterion(int id, const std::string& label, Fn&& fn) {
    const auto t0 = Clock::now();
    Check ck;
    std::string note;
    try {
        note = fn(ck);
    } catch (const std::exception& e) {
        ck.expect(false, std::string("exception: ") + e.what());
    }
    const double secs = seconds_since(t0);
    const bool pass = ck.bad.empty();
    if (!pass) ++g_failures;
    std::printf("%s %2d  %-46s (%7.2f s)  %s\n", pass ? "PASS" : "FAIL", id, label.c_str(), secs,
                pass ? note.c_str() : ck.bad.c_str());
    std::fflush(stdout);
}

double uniform(std::mt19937& gen, double lo, double hi) {
    return lo + (hi - lo) * std::generate_canonical<double, 53>(gen);
}

double seg_dist(double px, double py, const std::array<double, 2>& a,
                const std::array<double, 2>& b) {
    const double vx = b[0] - a[0];
    const double vy = b[1] - a[1];
    const double len2 = vx * vx + vy * vy;
    double t = 0.0;
    if (len2 > 0.0) t = std::clamp(((px - a[0]) * vx + (py - a[1]) * vy) / len2, 0.0, 1.0);
    return std::hypot(px - (a[0] + t * vx), py - (a[1] + t * vy));
}

Eigen::MatrixXd relative_positions(const SimTrace& tr, int row) {
    Eigen::MatrixXd rel(tr.n, 2);
    double cx = 0.0, cy = 0.0;
    for (int i = 0; i < tr.n; ++i) {
        rel(i, 0) = tr.pos_x(row, i);
        rel(i, 1) = tr.pos_y(row, i);
        cx += rel(i, 0);
        cy += rel(i, 1);
    }
    rel.col(0).array() -= cx / tr.n;
    rel.col(1).array() -= cy / tr.n;
    return rel;
}

const char* kTopologyPath = DELAYNET_DATA_DIR "/six_agents.json";

// Poses slightly outside the target formation, headings tangential (the
// controller then curves the paths instead of braking them), which keeps
// every speed clear of the linearization guard over a short horizon.
Eigen::MatrixXd near_formation_poses(const Eigen::MatrixXd& offsets, double scale, double v0) {
    const int n = static_cast<int>(offsets.rows());
    Eigen::MatrixXd poses(n, 4);
    for (int i = 0; i < n; ++i) {
        poses(i, 0) = scale * offsets(i, 0);
        poses(i, 1) = scale * offsets(i, 1);
        poses(i, 2) = std::atan2(offsets(i, 0), -offsets(i, 1));
        poses(i, 3) = v0;
    }
    return poses;
}

std::string c1_eigenvalues(Check& ck) {
    std::ifstream in(kTopologyPath);
    ck.expect(in.good(), "topology file missing");
    const auto t0 = Clock::now();
    g_topo = std::make_unique<Topology>(Topology::from_stream(in));
    g_c = build_c_matrix(*g_topo);
    g_sp = std::make_unique<Spectrum>(spectrum(g_c));
    const double elapsed = seconds_since(t0);

    std::vector<Complex> got;
    for (int i = 0; i < g_sp->factor_count(); ++i) {
        const Complex lam = g_sp->eigenvalues[static_cast<size_t>(i)];
        got.push_back(lam);
        if (g_sp->is_pair(i)) got.push_back(std::conj(lam));
    }
    const std::vector<Complex> expected = {
        {1.0, 0.0}, {0.46, 0.0}, {-0.5, 0.0}, {-0.64, 0.0}, {-0.16, 0.21}, {-0.16, -0.21}};
    ck.expect(got.size() == expected.size(),
              "expected 6 eigenvalues, got " + std::to_string(got.size()));
    std::vector<bool> used(got.size(), false);
    for (const Complex& e : expected) {
        bool matched = false;
        for (size_t k = 0; k < got.size() && !matched; ++k) {
            if (!used[k] && std::abs(got[k] - e) <= 0.01 + 1e-12) {
                used[k] = true;
                matched = true;
            }
        }
        ck.expect(matched, "no eigenvalue within 0.01 of (" + fmt_g(e.real()) + ", " +
                               fmt_g(e.imag()) + ")");
    }
    ck.expect(elapsed < 1.0, "took " + fmt_g(elapsed) + " s (limit 1 s)");

    g_factors = factorize(*g_sp, Gains{1.0, 0.5});
    return "all 6 within 0.01 in " + fmt_g(elapsed) + " s";
}

std::string c2_factorization(Check& ck) {
    ck.expect(!g_factors.empty(), "factors unavailable");
    if (g_factors.empty()) return "";
    const auto t0 = Clock::now();
    std::mt19937 gen(12);
    double worst = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
        const Complex s(uniform(gen, -2.0, 2.0), uniform(gen, -5.0, 5.0));
        const DelayPair tau{uniform(gen, 0.0, 4.0), uniform(gen, 0.0, 4.0)};
        const Complex det = eval_full_system(*g_sp, Gains{1.0, 0.5}, s, tau);
        const Complex prod = eval_factor_product(g_factors, s, tau);
        const double rel = std::abs(prod - det) / std::abs(det);
        worst = std::max(worst, rel);
    }
    const double elapsed = seconds_since(t0);
    ck.expect(worst < 1e-6, "relative mismatch " + fmt_g(worst));
    ck.expect(elapsed < 10.0, "took " + fmt_g(elapsed) + " s (limit 10 s)");
    return "100 samples, worst relative error " + fmt_g(worst);
}

std::string c3_point_classification(Check& ck) {
    ck.expect(!g_factors.empty(), "factors unavailable");
    if (g_factors.empty()) return "";
    const auto t0 = Clock::now();
    g_map = std::make_unique<StabilityMap>(stability_map(g_factors, 8.0, 400));
    const double elapsed = seconds_since(t0);
    ck.expect(elapsed < 120.0, "map took " + fmt_g(elapsed) + " s (limit 120 s)");

    struct Probe {
        double t1, t2;
        bool stable;
        const char* name;
    };
    const Probe probes[] = {{0.3, 0.2, true, "a"},
                            {2.0, 1.0, true, "b"},
                            {1.0, 2.0, false, "c"},
                            {1.0, 5.5, true, "d"},
                            {3.5, 2.0, true, "e"}};
    for (const Probe& p : probes) {
        const int nu = g_map->nu_at(p.t1, p.t2);
        ck.expect(nu >= 0, std::string("point ") + p.name + ": indeterminate cell");
        ck.expect((nu == 0) == p.stable, std::string("point ") + p.name +
                                             ": crossing count gives NU = " + std::to_string(nu));
        const int winding = count_rhp_roots(g_factors, DelayPair{p.t1, p.t2});
        ck.expect((winding == 0) == p.stable,
                  std::string("point ") + p.name +
                      ": winding count gives " + std::to_string(winding));
        ck.expect(nu == winding, std::string("point ") + p.name + ": routes disagree (" +
                                     std::to_string(nu) + " vs " + std::to_string(winding) + ")");
    }
    return "400x400 map in " + fmt_g(elapsed) + " s; points a-e classified S,S,U,S,S by both routes";
}

std::string c4_map_vs_spectral(Check& ck) {
    ck.expect(g_map != nullptr, "map unavailable");
    if (!g_map) return "";
    // cells tested must sit clear of every curve; the point cloud is dense
    // (adaptive refinement), so a 0.06 cutoff over a stride-2 subsample
    // guarantees the required 0.05 clearance
    std::vector<std::array<double, 2>> cloud;
    for (const Curve& c : g_map->curves)
        for (size_t k = 0; k < c.points.size(); k += 2) {
            const auto& p = c.points[k];
            if (p.tau1 <= 8.8 && p.tau2 <= 8.8) cloud.push_back({p.tau1, p.tau2});
        }
    std::mt19937 gen(2026);
    const double h = g_map->cell();
    int tested = 0;
    int disagreements = 0;
    int attempts = 0;
    while (tested < 220 && attempts < 20000) {
        ++attempts;
        const int i = static_cast<int>(gen() % 400);
        const int j = static_cast<int>(gen() % 400);
        const double t1 = (i + 0.5) * h;
        const double t2 = (j + 0.5) * h;
        const int nu = g_map->nu[static_cast<size_t>(j) * 400 + i];
        if (nu < 0) continue;
        double d2 = 1e30;
        for (const auto& q : cloud) {
            const double dx = q[0] - t1;
            const double dy = q[1] - t2;
            d2 = std::min(d2, dx * dx + dy * dy);
            if (d2 < 0.06 * 0.06) break;
        }
        if (d2 < 0.06 * 0.06) continue;
        const double sigma = spectral_abscissa(g_factors, DelayPair{t1, t2});
        if ((nu == 0) != (sigma < 0.0)) ++disagreements;
        ++tested;
    }
    ck.expect(tested >= 200, "only " + std::to_string(tested) + " clear cells found");
    ck.expect(disagreements == 0, std::to_string(disagreements) + " disagreements");
    return std::to_string(tested) + " cells, 0 disagreements";
}

std::string c5_rigid_body_mode(Check& ck) {
    ck.expect(!g_factors.empty(), "factors unavailable");
    if (g_factors.empty()) return "";
    const Factor& f0 = g_factors.front();
    ck.expect(f0.is_centroid, "first factor is not the centroid factor");
    std::mt19937 gen(31);
    for (int trial = 0; trial < 50; ++trial) {
        const DelayPair tau{uniform(gen, 0.0, 8.0), uniform(gen, 0.0, 8.0)};
        const Complex val = f0.eval(Complex(0.0, 0.0), tau);
        ck.expect(val.real() == 0.0 && val.imag() == 0.0,
                  "nonzero at s = 0 for tau = (" + fmt_g(tau.tau1) + ", " + fmt_g(tau.tau2) +
                      "): " + fmt_g(std::abs(val)));
    }
    return "exactly zero at s = 0 for all 50 delay pairs";
}

std::string c6_kernel_bound(Check& ck) {
    ck.expect(g_map != nullptr, "map unavailable");
    if (!g_map) return "";
    ck.expect(g_map->kernel_family_count <= 36,
              std::to_string(g_map->kernel_family_count) + " kernel families (bound 36)");
    return std::to_string(g_map->kernel_family_count) + " kernel families (bound 36)";
}

std::string c7_root_tendency(Check& ck) {
    ck.expect(g_map != nullptr, "map unavailable");
    if (!g_map) return "";
    std::vector<std::pair<const Factor*, const CurvePoint*>> kernel_points;
    for (const Curve& c : g_map->curves) {
        if (c.kind != CurveKind::Kernel) continue;
        const Factor* f = nullptr;
        for (const Factor& cand : g_factors)
            if (cand.index == c.factor_index) f = &cand;
        if (f == nullptr) continue;
        for (const CurvePoint& p : c.points) kernel_points.push_back({f, &p});
    }
    ck.expect(!kernel_points.empty(), "no kernel points");
    if (kernel_points.empty()) return "";

    std::mt19937 gen(77);
    int mismatches = 0;
    int fd_checks = 0;
    std::string first;
    auto fd_matches = [&](const Factor& f, double omega, const DelayPair& tau, int which,
                          int analytic) {
        ++fd_checks;
        auto fd = oracles::fd_root_tendency(f, Complex(0.0, omega), tau, which, 1e-5);
        if (!fd) fd = oracles::fd_root_tendency(f, Complex(0.0, omega), tau, which, 1e-4);
        if (!fd || *fd != analytic || analytic == 0) {
            ++mismatches;
            if (first.empty())
                first = "omega " + fmt_g(omega) + " tau (" + fmt_g(tau.tau1) + ", " +
                        fmt_g(tau.tau2) + ") delay " + std::to_string(which) + ": analytic " +
                        std::to_string(analytic) + ", fd " + (fd ? std::to_string(*fd) : "lost");
        }
    };

    for (int trial = 0; trial < 30; ++trial) {
        const auto& [f, p] = kernel_points[gen() % kernel_points.size()];
        const double w = p->omega;
        const DelayPair tau{p->tau1, p->tau2};
        const int rt1 = rt_sign(*f, w, tau, 1);
        const int rt2 = rt_sign(*f, w, tau, 2);
        fd_matches(*f, w, tau, 1, rt1);
        fd_matches(*f, w, tau, 2, rt2);
        for (int i = 0; i <= 2; ++i) {
            for (int k = 0; k <= 2; ++k) {
                if (i == 0 && k == 0) continue;
                const DelayPair q{(p->theta1 + kTwoPi * i) / w, (p->theta2 + kTwoPi * k) / w};
                const int q1 = rt_sign(*f, w, q, 1);
                const int q2 = rt_sign(*f, w, q, 2);
                fd_matches(*f, w, q, 1, q1);
                fd_matches(*f, w, q, 2, q2);
                // shifting only theta1 keeps tau2 fixed, so the tendency in
                // tau1 must carry over from the kernel point (and vice versa)
                if (k == 0 && q1 != rt1) {
                    ++mismatches;
                    if (first.empty()) first = "tau1-offspring tendency flipped";
                }
                if (i == 0 && q2 != rt2) {
                    ++mismatches;
                    if (first.empty()) first = "tau2-offspring tendency flipped";
                }
            }
        }
    }
    ck.expect(mismatches == 0, std::to_string(mismatches) + " mismatches; first: " + first);
    return "30 kernel points, " + std::to_string(fd_checks) + " finite-difference checks, 0 mismatches";
}

std::string c8_fast_settle(Check& ck) {
    ck.expect(g_sp != nullptr, "spectrum unavailable");
    if (!g_sp) return "";
    const auto t0 = Clock::now();
    const Scenario sc = load_scenario(DELAYNET_DATA_DIR "/scenario_fast.json");
    const FormationSpec fs = design_formation(*g_sp, sc.gains, sc.offsets);
    const Eigen::MatrixXd poses = random_poses(g_topo->n, 1, sc.box, sc.v_init);
    const Eigen::MatrixXd z0 = linear_state_from_poses(poses);
    const Eigen::MatrixXd predicted =
        predict_final_positions(*g_sp, sc.gains, sc.delays, fs.force, z0);

    SimConfig cfg;
    cfg.dt = sc.dt;
    cfg.t_end = sc.t_end;
    const SimTrace tr = simulate_unicycle(g_c, sc.gains, sc.delays, fs.force, poses, cfg);

    double radius = 1.0;
    for (int i = 0; i < sc.offsets.rows(); ++i)
        radius = std::max(radius, sc.offsets.row(i).norm());
    const auto settle = settle_time(tr, predicted, 0.01 * radius);
    ck.expect(settle.has_value(), "did not settle within the horizon");
    if (settle) {
        ck.expect(*settle >= 20.0 && *settle <= 45.0,
                  "settled at " + fmt_g(*settle) + " s (want 20..45)");
    }

    const int last = static_cast<int>(tr.t.size()) - 1;
    const Eigen::MatrixXd rel = relative_positions(tr, last);
    double worst = 0.0;
    for (int i = 0; i < tr.n; ++i)
        worst = std::max(worst, (rel.row(i) - sc.offsets.row(i)).norm());
    ck.expect(worst <= 1e-2, "final offset error " + fmt_g(worst) + " m");

    const double elapsed = seconds_since(t0);
    ck.expect(elapsed < 30.0, "took " + fmt_g(elapsed) + " s (limit 30 s)");
    return "settled at " + fmt_g(settle ? *settle : -1.0) + " s, final offset error " +
           fmt_g(worst) + " m";
}

std::string c9_slow_settle(Check& ck) {
    ck.expect(g_sp != nullptr, "spectrum unavailable");
    if (!g_sp) return "";
    const Scenario sc = load_scenario(DELAYNET_DATA_DIR "/scenario_slow.json");
    const FormationSpec fs = design_formation(*g_sp, sc.gains, sc.offsets);
    const Eigen::MatrixXd poses = random_poses(g_topo->n, 1, sc.box, sc.v_init);
    const Eigen::MatrixXd z0 = linear_state_from_poses(poses);
    const Eigen::MatrixXd predicted =
        predict_final_positions(*g_sp, sc.gains, sc.delays, fs.force, z0);

    SimConfig cfg;
    cfg.dt = sc.dt;
    cfg.t_end = sc.t_end;
    cfg.record_stride = 5;
    const SimTrace tr = simulate_unicycle(g_c, sc.gains, sc.delays, fs.force, poses, cfg);

    double radius = 1.0;
    for (int i = 0; i < sc.offsets.rows(); ++i)
        radius = std::max(radius, sc.offsets.row(i).norm());
    const auto settle = settle_time(tr, predicted, 0.01 * radius);
    if (settle) {
        ck.expect(*settle > 100.0, "settled at " + fmt_g(*settle) + " s (want > 100)");
        return "settled at " + fmt_g(*settle) + " s";
    }
    // convergence this slow may not finish inside the horizon; that still
    // demonstrates a settle time beyond 100 s as long as the error shrinks
    const Eigen::MatrixXd rel_end =
        relative_positions(tr, static_cast<int>(tr.t.size()) - 1);
    const Eigen::MatrixXd rel_start = relative_positions(tr, 0);
    double err_end = 0.0, err_start = 0.0;
    for (int i = 0; i < tr.n; ++i) {
        err_end = std::max(err_end, (rel_end.row(i) - sc.offsets.row(i)).norm());
        err_start = std::max(err_start, (rel_start.row(i) - sc.offsets.row(i)).norm());
    }
    ck.expect(err_end < err_start, "not converging: offset error " + fmt_g(err_start) + " -> " +
                                       fmt_g(err_end));
    return "no settle within " + fmt_g(sc.t_end) + " s (error " + fmt_g(err_start) + " -> " +
           fmt_g(err_end) + " m)";
}

std::string c10_surface_boundary(Check& ck) {
    ck.expect(g_map != nullptr, "map unavailable");
    if (!g_map) return "";
    const auto t0 = Clock::now();
    const AbscissaSurface surf = abscissa_surface(g_factors, 8.0, 100);
    const double elapsed = seconds_since(t0);

    const auto zero_lines = contour_polylines(surf.sigma, surf.resolution, surf.cell(), 0.0);
    const auto boundary = g_map->stable_boundary();
    ck.expect(!zero_lines.empty(), "no zero contour found");
    ck.expect(!boundary.empty(), "no stable boundary found");

    double worst = 0.0;
    for (const auto& line : zero_lines) {
        for (const auto& v : line) {
            double best = 1e30;
            for (const auto& poly : boundary)
                for (size_t k = 0; k + 1 < poly.size(); ++k)
                    best = std::min(best, seg_dist(v[0], v[1], poly[k], poly[k + 1]));
            worst = std::max(worst, best);
        }
    }
    ck.expect(worst <= surf.cell() + 1e-9,
              "zero contour strays " + fmt_g(worst) + " from the boundary (cell " +
                  fmt_g(surf.cell()) + ")");
    return "max deviation " + fmt_g(worst) + " (cell " + fmt_g(surf.cell()) + "), surface in " +
           fmt_g(elapsed) + " s";
}

std::string c11_linearization(Check& ck) {
    std::mt19937 gen(41);
    double worst_rt = 0.0;
    for (int trial = 0; trial < 300; ++trial) {
        const double theta = uniform(gen, -3.14, 3.14);
        double v = uniform(gen, 0.1, 3.0);
        if (trial % 2) v = -v;
        const double u1 = uniform(gen, -3.0, 3.0);
        const double u2 = uniform(gen, -3.0, 3.0);
        const auto lr = feedback_linearize(u1, u2, theta, v);
        ck.expect(!lr.guarded, "guard fired with |v| >= 0.1");
        double b1 = 0, b2 = 0;
        body_to_plane(lr.v_dot, lr.omega, theta, v, b1, b2);
        worst_rt = std::max({worst_rt, std::abs(b1 - u1), std::abs(b2 - u2)});
    }
    ck.expect(worst_rt < 1e-12, "round trip error " + fmt_g(worst_rt));
    ck.expect(g_sp != nullptr, "spectrum unavailable");
    if (!g_sp) return "";

    // second differences of the integrated positions against the commanded
    // accelerations; stencils touching delay-echo times (multiples of 0.1
    // for these delays) see reduced smoothness and are excluded
    const Scenario sc = load_scenario(DELAYNET_DATA_DIR "/scenario_fast.json");
    const FormationSpec fs = design_formation(*g_sp, sc.gains, sc.offsets);
    const Eigen::MatrixXd poses = near_formation_poses(sc.offsets, 1.2, 0.4);

    auto fd_error = [&](double dt) {
        SimConfig cfg;
        cfg.dt = dt;
        cfg.t_end = 3.0;
        const SimTrace tr = simulate_unicycle(g_c, sc.gains, sc.delays, fs.force, poses, cfg);
        ck.expect(tr.guard_events == 0,
                  "guard fired at dt = " + fmt_g(dt) + " (" + std::to_string(tr.guard_events) +
                      " events)");
        double err = 0.0;
        const long rows = tr.states.rows();
        for (long r = 1; r + 1 < rows; ++r) {
            const double t = tr.t[static_cast<size_t>(r)];
            const double frac = std::fmod(t + 0.05, 0.1) - 0.05;
            if (std::abs(frac) <= 2.5 * dt) continue;
            for (int i = 0; i < tr.n; ++i) {
                for (int axis = 0; axis < 2; ++axis) {
                    const int col = 4 * i + axis;
                    const double fd = (tr.states(r + 1, col) - 2.0 * tr.states(r, col) +
                                       tr.states(r - 1, col)) /
                                      (dt * dt);
                    err = std::max(err, std::abs(fd - tr.controls(r, 2 * i + axis)));
                }
            }
        }
        return err;
    };

    const double e1 = fd_error(1e-2);
    const double e2 = fd_error(5e-3);
    const double e3 = fd_error(2.5e-3);
    ck.expect(e2 < 0.4 * e1, "halving dt shrank error only " + fmt_g(e1) + " -> " + fmt_g(e2));
    ck.expect(e3 < 0.4 * e2, "halving dt shrank error only " + fmt_g(e2) + " -> " + fmt_g(e3));
    return "round trip " + fmt_g(worst_rt) + "; fd errors " + fmt_g(e1) + " / " + fmt_g(e2) +
           " / " + fmt_g(e3);
}

std::string c12_model_equivalence(Check& ck) {
    ck.expect(g_sp != nullptr, "spectrum unavailable");
    if (!g_sp) return "";
    const Scenario sc = load_scenario(DELAYNET_DATA_DIR "/scenario_slow.json");
    const FormationSpec fs = design_formation(*g_sp, sc.gains, sc.offsets);
    // a start whose speeds stay clear of the linearization floor for the
    // whole horizon, so both models integrate the same smooth field
    const Eigen::MatrixXd poses = random_poses(g_topo->n, 2, sc.box, 0.5);
    const Eigen::MatrixXd z0 = linear_state_from_poses(poses);

    SimConfig cfg;
    cfg.dt = 1e-3;
    cfg.t_end = 50.0;
    cfg.record_stride = 1000;
    const SimTrace lin = simulate_linear(g_c, sc.gains, sc.delays, fs.force, z0, cfg);
    const SimTrace uni = simulate_unicycle(g_c, sc.gains, sc.delays, fs.force, poses, cfg);
    ck.expect(uni.guard_events == 0,
              "guard fired " + std::to_string(uni.guard_events) + " times; comparison void");
    ck.expect(lin.t.size() == uni.t.size(), "trace lengths differ");

    const int last = static_cast<int>(lin.t.size()) - 1;
    ck.expect(std::abs(lin.t[static_cast<size_t>(last)] - 50.0) < 1e-9, "horizon mismatch");
    double worst = 0.0;
    for (int i = 0; i < lin.n; ++i) {
        const double theta = uni.states(last, 4 * i + 2);
        const double v = uni.states(last, 4 * i + 3);
        worst = std::max(worst, std::abs(lin.states(last, 4 * i) - uni.states(last, 4 * i)));
        worst = std::max(worst,
                         std::abs(lin.states(last, 4 * i + 2) - uni.states(last, 4 * i + 1)));
        worst = std::max(worst,
                         std::abs(lin.states(last, 4 * i + 1) - v * std::cos(theta)));
        worst = std::max(worst,
                         std::abs(lin.states(last, 4 * i + 3) - v * std::sin(theta)));
    }
    ck.expect(worst <= 5e-3, "state mismatch " + fmt_g(worst) + " at t = 50");
    return "max state difference " + fmt_g(worst) + " at t = 50, guard silent";
}

} // namespace

int main() {
    criterion(1, "eigenvalue reproduction", c1_eigenvalues);
    criterion(2, "factor product matches the full determinant", c2_factorization);
    criterion(3, "five-point classification, both routes", c3_point_classification);
    criterion(4, "crossing-count map vs spectral abscissa", c4_map_vs_spectral);
    criterion(5, "rigid-body mode pinned at s = 0", c5_rigid_body_mode);
    criterion(6, "kernel family bound", c6_kernel_bound);
    criterion(7, "root tendency: analytic vs finite difference", c7_root_tendency);
    criterion(8, "fast formation settle (short delays)", c8_fast_settle);
    criterion(9, "slow formation settle (long delays)", c9_slow_settle);
    criterion(10, "abscissa zero contour hugs the boundary", c10_surface_boundary);
    criterion(11, "input linearization round trip and order", c11_linearization);
    criterion(12, "linear and unicycle models agree", c12_model_equivalence);

    if (g_failures == 0)
        std::printf("all 12 criteria passed\n");
    else
        std::printf("%d of 12 criteria FAILED\n", g_failures);
    return g_failures;
}
