#pragma once

// Shared test oracles. Each one reaches a result through a different route
// than the library code it checks: plain scalar formulas, finite
// differences, matrix exponentials, or brute-force reachability.

#include <cmath>
#include <complex>
#include <optional>
#include <random>
#include <vector>

#include <Eigen/Dense>
#include <unsupported/Eigen/MatrixFunctions>

#include "delaynet/quasipoly.hpp"

namespace oracles {

using delaynet::Complex;
using delaynet::DelayPair;
using delaynet::Gains;

/// Scalar per-eigenvalue quasipolynomial written out directly:
/// q(s; lambda) = s^2 + D s + P - lambda (P e^{-tau1 s} + D s e^{-tau2 s}).
inline Complex q_scalar(Complex s, Complex lam, const Gains& g, const DelayPair& tau) {
    return s * s + g.d * s + g.p -
           lam * (g.p * std::exp(-tau.tau1 * s) + g.d * s * std::exp(-tau.tau2 * s));
}

/// Newton root tracking using only factor evaluations (derivative by
/// central difference), independent of the analytic jet.
inline std::optional<Complex> track_root(const delaynet::Factor& f, const DelayPair& tau,
                                         Complex s0) {
    Complex s = s0;
    for (int it = 0; it < 80; ++it) {
        const Complex val = f.eval(s, tau);
        const double h = 1e-7 * std::max(1.0, std::abs(s));
        const Complex dval = (f.eval(s + h, tau) - f.eval(s - h, tau)) / (2.0 * h);
        if (std::abs(dval) < 1e-14) return std::nullopt;
        const Complex step = val / dval;
        s -= step;
        if (std::abs(step) < 1e-13 * std::max(1.0, std::abs(s))) break;
    }
    if (std::abs(f.eval(s, tau)) > 1e-8) return std::nullopt;
    return s;
}

/// Root-tendency by finite differences: perturb one delay, track the root
/// from the imaginary-axis crossing, and compare real parts.
inline std::optional<int> fd_root_tendency(const delaynet::Factor& f, Complex s_cross,
                                           const DelayPair& tau, int which_delay,
                                           double h = 1e-5) {
    DelayPair plus = tau;
    DelayPair minus = tau;
    (which_delay == 1 ? plus.tau1 : plus.tau2) += h;
    (which_delay == 1 ? minus.tau1 : minus.tau2) -= h;
    if (minus.tau1 < 0.0 || minus.tau2 < 0.0) return std::nullopt;
    const auto sp = track_root(f, plus, s_cross);
    const auto sm = track_root(f, minus, s_cross);
    if (!sp || !sm) return std::nullopt;
    const double d = sp->real() - sm->real();
    if (std::abs(d) < 1e-12) return 0;
    return d > 0.0 ? 1 : -1;
}

/// Exact flow of z' = A z + f_const via one augmented matrix exponential.
inline Eigen::VectorXd expm_flow(const Eigen::MatrixXd& a, const Eigen::VectorXd& z0,
                                 const Eigen::VectorXd& f_const, double t) {
    const long n = a.rows();
    Eigen::MatrixXd aug = Eigen::MatrixXd::Zero(n + 1, n + 1);
    aug.topLeftCorner(n, n) = a;
    aug.topRightCorner(n, 1) = f_const;
    const Eigen::MatrixXd e = (aug * t).exp();
    return e.topLeftCorner(n, n) * z0 + e.topRightCorner(n, 1);
}

/// Brute-force spanning-tree test: boolean transitive closure of the
/// information-flow relation, then look for a row reaching everyone.
inline bool reachability_spanning_tree(const Eigen::MatrixXd& adjacency) {
    const int n = static_cast<int>(adjacency.rows());
    // reach(k, i): information flows k -> i; adjacency(i, k) = 1 means i hears k
    std::vector<std::vector<bool>> reach(n, std::vector<bool>(n, false));
    for (int i = 0; i < n; ++i)
        for (int k = 0; k < n; ++k) reach[k][i] = adjacency(i, k) != 0.0 || i == k;
    for (int mid = 0; mid < n; ++mid)
        for (int a = 0; a < n; ++a)
            for (int b = 0; b < n; ++b)
                if (reach[a][mid] && reach[mid][b]) reach[a][b] = true;
    for (int root = 0; root < n; ++root) {
        bool all = true;
        for (int i = 0; i < n; ++i) all = all && reach[root][i];
        if (all) return true;
    }
    return false;
}

inline double uniform(std::mt19937& gen, double lo, double hi) {
    return lo + (hi - lo) * std::generate_canonical<double, 53>(gen);
}

} // namespace oracles
