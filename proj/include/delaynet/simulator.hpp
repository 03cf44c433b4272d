#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "delaynet/errors.hpp"
#include "delaynet/quasipoly.hpp"

namespace delaynet {

/// Single-axis PD consensus control with a forcing slot. delayed_pos and
/// delayed_vel carry every agent's position at t - tau1 and velocity at
/// t - tau2; the row of c selects and weights the informers.
inline double control_input(const Eigen::MatrixXd& c, int agent, double own_pos, double own_vel,
                            const Eigen::VectorXd& delayed_pos, const Eigen::VectorXd& delayed_vel,
                            const Gains& gains, double force) {
    double up = 0.0;
    double ud = 0.0;
    for (int k = 0; k < c.cols(); ++k) {
        const double w = c(agent, k);
        if (w == 0.0) continue;
        up += w * delayed_pos(k);
        ud += w * delayed_vel(k);
    }
    return gains.p * (up - own_pos) + gains.d * (ud - own_vel) + force;
}

struct LinearizeResult {
    double v_dot = 0.0;
    double omega = 0.0;
    bool guarded = false;
};

/// Invert the point-velocity map: given the commanded planar acceleration
/// (u1, u2), recover (v_dot, omega). The inverse divides by the forward
/// speed, so |v| is floored at v_min (sign kept, +v_min at rest).
inline LinearizeResult feedback_linearize(double u1, double u2, double theta, double v,
                                          double v_min = 1e-3) {
    const double c = std::cos(theta);
    const double s = std::sin(theta);
    LinearizeResult r;
    r.v_dot = c * u1 + s * u2;
    r.guarded = std::abs(v) < v_min;
    const double vg = r.guarded ? (v >= 0.0 ? v_min : -v_min) : v;
    r.omega = (-s * u1 + c * u2) / vg;
    return r;
}

/// Forward map for the round-trip check: planar acceleration produced by
/// (v_dot, omega) at heading theta and speed v.
inline void body_to_plane(double v_dot, double omega, double theta, double v, double& u1,
                          double& u2) {
    const double c = std::cos(theta);
    const double s = std::sin(theta);
    u1 = c * v_dot - s * v * omega;
    u2 = s * v_dot + c * v * omega;
}

/// Wrap an angle to (-pi, pi].
inline double wrap_angle(double a) {
    a = std::fmod(a + std::numbers::pi, kTwoPi);
    if (a <= 0.0) a += kTwoPi;
    return a - std::numbers::pi;
}

namespace detail {

/// Uniformly spaced trajectory history with cubic Hermite interpolation.
/// Times are k * dt exactly; reads before the first node return the first
/// node (constant pre-history).
class History {
  public:
    History(int dim, double dt) : dim_(dim), dt_(dt) {}

    void push(const Eigen::VectorXd& y, const Eigen::VectorXd& dy) {
        ys_.push_back(y);
        dys_.push_back(dy);
    }

    // The node derivative at t = 0 needs a history read itself, so the
    // first node is pushed with a placeholder and patched afterwards.
    void fix_last_dy(const Eigen::VectorXd& dy) { dys_.back() = dy; }

    void eval(double t, Eigen::VectorXd& out) const {
        if (t <= 0.0 || ys_.size() == 1) {
            out = ys_.front();
            return;
        }
        const double last_t = static_cast<double>(ys_.size() - 1) * dt_;
        if (t >= last_t) {
            out = ys_.back();
            return;
        }
        auto k = static_cast<size_t>(std::floor(t / dt_));
        k = std::min(k, ys_.size() - 2);
        const double th = (t - static_cast<double>(k) * dt_) / dt_;
        const double th2 = th * th;
        const double th3 = th2 * th;
        const double h00 = 2.0 * th3 - 3.0 * th2 + 1.0;
        const double h10 = th3 - 2.0 * th2 + th;
        const double h01 = -2.0 * th3 + 3.0 * th2;
        const double h11 = th3 - th2;
        out = h00 * ys_[k] + (h10 * dt_) * dys_[k] + h01 * ys_[k + 1] + (h11 * dt_) * dys_[k + 1];
    }

    const Eigen::VectorXd& latest() const { return ys_.back(); }

  private:
    int dim_;
    double dt_;
    std::vector<Eigen::VectorXd> ys_;
    std::vector<Eigen::VectorXd> dys_;
};

} // namespace detail

enum class Model { Linear, Unicycle };

struct SimConfig {
    double dt = 1e-2;       // upper bound; clamped to min positive delay / 20
    double t_end = 100.0;
    double v_min = 1e-3;    // speed floor inside the feedback-linearizing inverse
    double divergence_bound = 1e6;
    int record_stride = 1;  // keep every k-th step in the trace
};

/// Integration step honoring the delay resolution rule: at most one
/// twentieth of the smallest delay when both are positive, at most 1e-2
/// when a zero delay removes that bound.
inline double effective_dt(const SimConfig& cfg, const DelayPair& delays) {
    if (!(cfg.dt > 0.0)) throw InputError("simulate: dt must be positive");
    double cap;
    if (delays.tau1 > 0.0 && delays.tau2 > 0.0) {
        cap = std::min(delays.tau1, delays.tau2) / 20.0;
    } else {
        cap = 1e-2;
        const double mx = std::max(delays.tau1, delays.tau2);
        if (mx > 0.0) cap = std::min(cap, mx / 20.0);
    }
    return std::min(cfg.dt, cap);
}

struct SimTrace {
    Model model = Model::Linear;
    int n = 0;
    double dt = 0.0;
    std::vector<double> t;
    // One row per recorded sample, 4 columns per agent:
    //   linear   x, vx, y, vy
    //   unicycle x, y, theta, v
    Eigen::MatrixXd states;
    // Commanded planar accelerations at the same samples, (ux, uy) per agent.
    Eigen::MatrixXd controls;
    long guard_events = 0;

    double pos_x(int row, int agent) const { return states(row, 4 * agent); }
    double pos_y(int row, int agent) const {
        return states(row, 4 * agent + (model == Model::Linear ? 2 : 1));
    }
};

namespace detail {

inline void check_divergence(const Eigen::VectorXd& y, double bound, double t) {
    for (int i = 0; i < y.size(); ++i) {
        if (!std::isfinite(y(i)) || std::abs(y(i)) > bound)
            throw DivergenceError("trajectory diverged at t = " + std::to_string(t));
    }
}

inline void check_sim_inputs(const Eigen::MatrixXd& c, const Gains& gains, const DelayPair& delays,
                             const Eigen::MatrixXd& force) {
    validate_gains(gains);
    validate_delays(delays);
    if (c.rows() != c.cols() || c.rows() < 2) throw InputError("simulate: c matrix must be n x n");
    if (force.rows() != 2 * c.rows() || force.cols() != 2)
        throw InputError("simulate: force must be 2n x 2");
}

} // namespace detail

/// Integrate the delayed double-integrator network. initial_state is
/// 2n x 2 ((position, velocity) per agent, one column per axis); the
/// pre-history is constant at the initial state. Fourth-order fixed-step
/// integration with cubic Hermite reads of the delayed terms; zero-delay
/// channels read the current integration stage instead.
inline SimTrace simulate_linear(const Eigen::MatrixXd& c, const Gains& gains,
                                const DelayPair& delays, const Eigen::MatrixXd& force,
                                const Eigen::MatrixXd& initial_state, const SimConfig& cfg) {
    detail::check_sim_inputs(c, gains, delays, force);
    const int n = static_cast<int>(c.rows());
    if (initial_state.rows() != 2 * n || initial_state.cols() != 2)
        throw InputError("simulate: initial state must be 2n x 2");

    const double dt = effective_dt(cfg, delays);
    const auto steps = static_cast<long>(std::ceil(cfg.t_end / dt - 1e-9));
    const int dim = 4 * n; // x-axis block (pos, vel)*n then y-axis block

    Eigen::VectorXd y(dim);
    for (int i = 0; i < 2 * n; ++i) {
        y(i) = initial_state(i, 0);
        y(2 * n + i) = initial_state(i, 1);
    }

    detail::History hist(dim, dt);
    Eigen::VectorXd del1(dim), del2(dim), dy(dim);

    const bool live1 = delays.tau1 < 1e-15;
    const bool live2 = delays.tau2 < 1e-15;

    auto deriv = [&](double t_stage, const Eigen::VectorXd& ys, Eigen::VectorXd& out) {
        if (!live1) hist.eval(t_stage - delays.tau1, del1);
        if (!live2) hist.eval(t_stage - delays.tau2, del2);
        const Eigen::VectorXd& p_src = live1 ? ys : del1;
        const Eigen::VectorXd& v_src = live2 ? ys : del2;
        for (int axis = 0; axis < 2; ++axis) {
            const int off = axis * 2 * n;
            for (int i = 0; i < n; ++i) {
                double up = 0.0;
                double ud = 0.0;
                for (int k = 0; k < n; ++k) {
                    const double w = c(i, k);
                    if (w == 0.0) continue;
                    up += w * p_src(off + 2 * k);
                    ud += w * v_src(off + 2 * k + 1);
                }
                out(off + 2 * i) = ys(off + 2 * i + 1);
                out(off + 2 * i + 1) = gains.p * (up - ys(off + 2 * i)) +
                                       gains.d * (ud - ys(off + 2 * i + 1)) +
                                       force(2 * i + 1, axis);
            }
        }
    };

    hist.push(y, Eigen::VectorXd::Zero(dim));
    deriv(0.0, y, dy);
    hist.fix_last_dy(dy);

    SimTrace trace;
    trace.model = Model::Linear;
    trace.n = n;
    trace.dt = dt;
    const long rec = std::max(1, cfg.record_stride);
    trace.t.reserve(static_cast<size_t>(steps / rec + 2));
    std::vector<Eigen::VectorXd> rows;
    std::vector<Eigen::VectorXd> ctrl_rows;
    rows.reserve(static_cast<size_t>(steps / rec + 2));
    ctrl_rows.reserve(static_cast<size_t>(steps / rec + 2));

    auto record = [&](long step, const Eigen::VectorXd& ys, const Eigen::VectorXd& dys) {
        Eigen::VectorXd row(dim);
        Eigen::VectorXd ctrl(2 * n);
        for (int i = 0; i < n; ++i) {
            row(4 * i) = ys(2 * i);
            row(4 * i + 1) = ys(2 * i + 1);
            row(4 * i + 2) = ys(2 * n + 2 * i);
            row(4 * i + 3) = ys(2 * n + 2 * i + 1);
            ctrl(2 * i) = dys(2 * i + 1);         // commanded x acceleration
            ctrl(2 * i + 1) = dys(2 * n + 2 * i + 1);
        }
        trace.t.push_back(static_cast<double>(step) * dt);
        rows.push_back(std::move(row));
        ctrl_rows.push_back(std::move(ctrl));
    };
    record(0, y, dy);

    Eigen::VectorXd k1 = dy, k2(dim), k3(dim), k4(dim), ytmp(dim);
    for (long s = 0; s < steps; ++s) {
        const double t = static_cast<double>(s) * dt;
        ytmp = y + (0.5 * dt) * k1;
        deriv(t + 0.5 * dt, ytmp, k2);
        ytmp = y + (0.5 * dt) * k2;
        deriv(t + 0.5 * dt, ytmp, k3);
        ytmp = y + dt * k3;
        deriv(t + dt, ytmp, k4);
        y += (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        const double t_next = static_cast<double>(s + 1) * dt;
        detail::check_divergence(y, cfg.divergence_bound, t_next);
        deriv(t_next, y, k1); // node derivative; reused as the next step's first stage
        hist.push(y, k1);
        if ((s + 1) % rec == 0 || s + 1 == steps) record(s + 1, y, k1);
    }

    trace.states.resize(static_cast<long>(rows.size()), dim);
    trace.controls.resize(static_cast<long>(rows.size()), 2 * n);
    for (size_t r = 0; r < rows.size(); ++r) {
        trace.states.row(static_cast<long>(r)) = rows[r];
        trace.controls.row(static_cast<long>(r)) = ctrl_rows[r];
    }
    return trace;
}

/// Integrate differential-drive agents under the same network control
/// mapped through the feedback-linearizing inverse. initial_pose is n x 4
/// (x, y, theta, v). The delayed channels carry the point coordinates
/// (position and planar velocity), matching what the linear network sees.
inline SimTrace simulate_unicycle(const Eigen::MatrixXd& c, const Gains& gains,
                                  const DelayPair& delays, const Eigen::MatrixXd& force,
                                  const Eigen::MatrixXd& initial_pose, const SimConfig& cfg) {
    detail::check_sim_inputs(c, gains, delays, force);
    const int n = static_cast<int>(c.rows());
    if (initial_pose.rows() != n || initial_pose.cols() != 4)
        throw InputError("simulate: initial pose must be n x 4 (x, y, theta, v)");

    const double dt = effective_dt(cfg, delays);
    const auto steps = static_cast<long>(std::ceil(cfg.t_end / dt - 1e-9));
    const int dim = 4 * n;  // (x, y, theta, v) per agent
    const int wdim = 4 * n; // point coordinates (x, vx, y, vy) per agent

    Eigen::VectorXd y(dim);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < 4; ++j) y(4 * i + j) = initial_pose(i, j);

    detail::History hist(wdim, dt);
    Eigen::VectorXd del1(wdim), del2(wdim);
    const bool live1 = delays.tau1 < 1e-15;
    const bool live2 = delays.tau2 < 1e-15;
    long guard_events = 0;

    auto point_coords = [&](const Eigen::VectorXd& ys, Eigen::VectorXd& w) {
        for (int i = 0; i < n; ++i) {
            const double th = ys(4 * i + 2);
            const double v = ys(4 * i + 3);
            w(4 * i) = ys(4 * i);
            w(4 * i + 1) = v * std::cos(th);
            w(4 * i + 2) = ys(4 * i + 1);
            w(4 * i + 3) = v * std::sin(th);
        }
    };

    Eigen::VectorXd wself(wdim);
    // out gets d(x, y, theta, v); wdot (optional) gets d(x, vx, y, vy) for
    // the history nodes.
    auto deriv = [&](double t_stage, const Eigen::VectorXd& ys, Eigen::VectorXd& out,
                     Eigen::VectorXd* wdot) {
        point_coords(ys, wself);
        if (!live1) hist.eval(t_stage - delays.tau1, del1);
        if (!live2) hist.eval(t_stage - delays.tau2, del2);
        const Eigen::VectorXd& p_src = live1 ? wself : del1;
        const Eigen::VectorXd& v_src = live2 ? wself : del2;
        for (int i = 0; i < n; ++i) {
            double px = 0.0, vx = 0.0, py = 0.0, vy = 0.0;
            for (int k = 0; k < n; ++k) {
                const double w = c(i, k);
                if (w == 0.0) continue;
                px += w * p_src(4 * k);
                vx += w * v_src(4 * k + 1);
                py += w * p_src(4 * k + 2);
                vy += w * v_src(4 * k + 3);
            }
            const double th = ys(4 * i + 2);
            const double v = ys(4 * i + 3);
            const double u1 = gains.p * (px - wself(4 * i)) + gains.d * (vx - wself(4 * i + 1)) +
                              force(2 * i + 1, 0);
            const double u2 = gains.p * (py - wself(4 * i + 2)) +
                              gains.d * (vy - wself(4 * i + 3)) + force(2 * i + 1, 1);
            const LinearizeResult lr = feedback_linearize(u1, u2, th, v, cfg.v_min);
            if (lr.guarded) ++guard_events;
            out(4 * i) = v * std::cos(th);
            out(4 * i + 1) = v * std::sin(th);
            out(4 * i + 2) = lr.omega;
            out(4 * i + 3) = lr.v_dot;
            if (wdot != nullptr) {
                (*wdot)(4 * i) = wself(4 * i + 1);
                (*wdot)(4 * i + 1) = u1;
                (*wdot)(4 * i + 2) = wself(4 * i + 3);
                (*wdot)(4 * i + 3) = u2;
            }
        }
    };

    Eigen::VectorXd dy(dim), wdot(wdim), wnode(wdim);
    point_coords(y, wnode);
    hist.push(wnode, Eigen::VectorXd::Zero(wdim));
    deriv(0.0, y, dy, &wdot);
    hist.fix_last_dy(wdot);

    SimTrace trace;
    trace.model = Model::Unicycle;
    trace.n = n;
    trace.dt = dt;
    const long rec = std::max(1, cfg.record_stride);
    trace.t.reserve(static_cast<size_t>(steps / rec + 2));
    std::vector<Eigen::VectorXd> rows;
    std::vector<Eigen::VectorXd> ctrl_rows;
    rows.reserve(static_cast<size_t>(steps / rec + 2));
    ctrl_rows.reserve(static_cast<size_t>(steps / rec + 2));
    auto record = [&](long step, const Eigen::VectorXd& ys, const Eigen::VectorXd& wd) {
        trace.t.push_back(static_cast<double>(step) * dt);
        rows.push_back(ys);
        Eigen::VectorXd ctrl(2 * n);
        for (int i = 0; i < n; ++i) {
            ctrl(2 * i) = wd(4 * i + 1);
            ctrl(2 * i + 1) = wd(4 * i + 3);
        }
        ctrl_rows.push_back(std::move(ctrl));
    };
    record(0, y, wdot);

    Eigen::VectorXd k1 = dy, k2(dim), k3(dim), k4(dim), ytmp(dim);
    for (long s = 0; s < steps; ++s) {
        const double t = static_cast<double>(s) * dt;
        ytmp = y + (0.5 * dt) * k1;
        deriv(t + 0.5 * dt, ytmp, k2, nullptr);
        ytmp = y + (0.5 * dt) * k2;
        deriv(t + 0.5 * dt, ytmp, k3, nullptr);
        ytmp = y + dt * k3;
        deriv(t + dt, ytmp, k4, nullptr);
        y += (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        for (int i = 0; i < n; ++i) y(4 * i + 2) = wrap_angle(y(4 * i + 2));
        const double t_next = static_cast<double>(s + 1) * dt;
        detail::check_divergence(y, cfg.divergence_bound, t_next);
        deriv(t_next, y, k1, &wdot);
        point_coords(y, wnode);
        hist.push(wnode, wdot);
        if ((s + 1) % rec == 0 || s + 1 == steps) record(s + 1, y, wdot);
    }

    trace.states.resize(static_cast<long>(rows.size()), dim);
    trace.controls.resize(static_cast<long>(rows.size()), 2 * n);
    for (size_t r = 0; r < rows.size(); ++r) {
        trace.states.row(static_cast<long>(r)) = rows[r];
        trace.controls.row(static_cast<long>(r)) = ctrl_rows[r];
    }
    trace.guard_events = guard_events;
    return trace;
}

/// First time every agent stays within tol of its predicted final position
/// for hold consecutive seconds. Nothing if that never happens inside the
/// trace (the hold window must fit before t_end).
inline std::optional<double> settle_time(const SimTrace& trace, const Eigen::MatrixXd& predicted,
                                         double tol, double hold = 5.0) {
    if (predicted.rows() != trace.n || predicted.cols() != 2)
        throw InputError("settle_time: predicted positions must be n x 2");
    const long rows = trace.states.rows();
    long good_start = -1;
    for (long r = 0; r < rows; ++r) {
        bool ok = true;
        for (int i = 0; i < trace.n && ok; ++i) {
            const double dx = trace.pos_x(static_cast<int>(r), i) - predicted(i, 0);
            const double dy = trace.pos_y(static_cast<int>(r), i) - predicted(i, 1);
            if (std::hypot(dx, dy) > tol) ok = false;
        }
        if (ok) {
            if (good_start < 0) good_start = r;
            if (trace.t[static_cast<size_t>(r)] - trace.t[static_cast<size_t>(good_start)] >=
                hold - 1e-9)
                return trace.t[static_cast<size_t>(good_start)];
        } else {
            good_start = -1;
        }
    }
    return std::nullopt;
}

/// Deterministic uniform double in [0, 1) from a seeded 64-bit generator.
inline double uniform01(std::mt19937_64& gen) {
    return static_cast<double>(gen() >> 11) * 0x1.0p-53;
}

struct PoseBox {
    double x_lo = -3.0, x_hi = 3.0;
    double y_lo = -3.0, y_hi = 3.0;
};

/// Random initial poses: positions uniform in the box, headings uniform in
/// (-pi, pi], forward speed v_init. Returns n x 4 (x, y, theta, v).
inline Eigen::MatrixXd random_poses(int n, std::uint64_t seed, const PoseBox& box,
                                    double v_init) {
    if (n < 1) throw InputError("random_poses: n must be positive");
    if (!(box.x_hi > box.x_lo) || !(box.y_hi > box.y_lo))
        throw InputError("random_poses: degenerate box");
    std::mt19937_64 gen(seed);
    Eigen::MatrixXd poses(n, 4);
    for (int i = 0; i < n; ++i) {
        poses(i, 0) = box.x_lo + (box.x_hi - box.x_lo) * uniform01(gen);
        poses(i, 1) = box.y_lo + (box.y_hi - box.y_lo) * uniform01(gen);
        poses(i, 2) = wrap_angle(kTwoPi * uniform01(gen));
        poses(i, 3) = v_init;
    }
    return poses;
}

/// Matching linear-model initial state: positions from the poses, planar
/// velocity v * (cos theta, sin theta). Returns 2n x 2.
inline Eigen::MatrixXd linear_state_from_poses(const Eigen::MatrixXd& poses) {
    if (poses.cols() != 4) throw InputError("linear_state_from_poses: poses must be n x 4");
    const int n = static_cast<int>(poses.rows());
    Eigen::MatrixXd z0 = Eigen::MatrixXd::Zero(2 * n, 2);
    for (int i = 0; i < n; ++i) {
        z0(2 * i, 0) = poses(i, 0);
        z0(2 * i, 1) = poses(i, 1);
        z0(2 * i + 1, 0) = poses(i, 3) * std::cos(poses(i, 2));
        z0(2 * i + 1, 1) = poses(i, 3) * std::sin(poses(i, 2));
    }
    return z0;
}

} // namespace delaynet
