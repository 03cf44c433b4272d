#pragma once

#include <array>
#include <cmath>
#include <complex>
#include <numbers>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "delaynet/errors.hpp"
#include "delaynet/spectrum.hpp"

namespace delaynet {

inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

struct Gains {
    double p = 1.0; // proportional, 1/s^2
    double d = 1.0; // derivative, 1/s
};

inline void validate_gains(const Gains& g) {
    if (!(g.p > 0.0) || !(g.d > 0.0) || !std::isfinite(g.p) || !std::isfinite(g.d))
        throw InputError("gains: P and D must be finite and positive");
}

struct DelayPair {
    double tau1 = 0.0; // position channel, s
    double tau2 = 0.0; // velocity channel, s
};

inline void validate_delays(const DelayPair& d) {
    if (!(d.tau1 >= 0.0) || !(d.tau2 >= 0.0) || !std::isfinite(d.tau1) || !std::isfinite(d.tau2))
        throw InputError("delays: tau1 and tau2 must be finite and non-negative");
}

enum class FactorKind { SecondOrder, FourthOrder };

namespace detail {

/// Roots of a real polynomial, coefficients ascending in degree, via the
/// companion matrix. Leading coefficient must be nonzero.
inline std::vector<Complex> poly_roots(const std::vector<double>& coeffs) {
    int deg = static_cast<int>(coeffs.size()) - 1;
    while (deg > 0 && coeffs[deg] == 0.0) --deg;
    if (deg < 1) return {};
    if (deg == 1) return {Complex(-coeffs[0] / coeffs[1], 0.0)};
    Eigen::MatrixXd comp = Eigen::MatrixXd::Zero(deg, deg);
    for (int i = 1; i < deg; ++i) comp(i, i - 1) = 1.0;
    for (int i = 0; i < deg; ++i) comp(i, deg - 1) = -coeffs[i] / coeffs[deg];
    Eigen::EigenSolver<Eigen::MatrixXd> es(comp, false);
    std::vector<Complex> out(deg);
    for (int i = 0; i < deg; ++i) out[i] = es.eigenvalues()(i);
    return out;
}

} // namespace detail

/// One factor of the characteristic equation in the six-coefficient form
///   g1(s) + g2 e^{-tau1 s} + g3 e^{-tau2 s} + g4 e^{-2 tau1 s}
///         + g5 e^{-2 tau2 s} + g6 e^{-(tau1+tau2) s} = 0.
/// Second-order factors come from real eigenvalues of C (only g1..g3
/// nonzero); fourth-order factors from conjugate pairs. The coefficient
/// functions are fixed closed forms in (P, D, lambda), cheap enough to
/// evaluate millions of times in delay-plane sweeps.
struct Factor {
    FactorKind kind = FactorKind::SecondOrder;
    Complex lambda; // pair representative has Im > 0
    Gains gains;
    bool is_centroid = false; // the lambda = 1 factor, carries the s = 0 mode
    int index = 0;            // position in the factor list

    /// Values of g1..g6 and their s-derivatives at s.
    struct Coeffs {
        std::array<Complex, 6> g;
        std::array<Complex, 6> dg;
    };

    Coeffs coeffs(Complex s) const {
        const double p = gains.p, d = gains.d;
        Coeffs c{};
        if (kind == FactorKind::SecondOrder) {
            const double lam = lambda.real();
            c.g[0] = s * s + d * s + p;
            c.g[1] = -lam * p;
            c.g[2] = -lam * d * s;
            c.dg[0] = 2.0 * s + d;
            c.dg[1] = 0.0;
            c.dg[2] = -lam * d;
        } else {
            const double r = lambda.real();
            const double q = std::norm(lambda);
            const Complex beta = s * s + d * s + p;
            const Complex dbeta = 2.0 * s + d;
            c.g[0] = beta * beta;
            c.g[1] = -2.0 * r * p * beta;
            c.g[2] = -2.0 * r * d * s * beta;
            c.g[3] = q * p * p;
            c.g[4] = q * d * d * s * s;
            c.g[5] = 2.0 * q * p * d * s;
            c.dg[0] = 2.0 * beta * dbeta;
            c.dg[1] = -2.0 * r * p * dbeta;
            c.dg[2] = -2.0 * r * d * (beta + s * dbeta);
            c.dg[3] = 0.0;
            c.dg[4] = 2.0 * q * d * d * s;
            c.dg[5] = 2.0 * q * p * d;
        }
        return c;
    }

    Complex eval(Complex s, const DelayPair& tau) const {
        const Coeffs c = coeffs(s);
        const Complex e1 = std::exp(-tau.tau1 * s);
        const Complex e2 = std::exp(-tau.tau2 * s);
        return c.g[0] + c.g[1] * e1 + c.g[2] * e2 + c.g[3] * e1 * e1 + c.g[4] * e2 * e2 +
               c.g[5] * e1 * e2;
    }

    /// Value plus the three first-order partials, shared-subexpression form
    /// used by Newton refinement and root-tendency evaluation.
    struct Jet {
        Complex value;
        Complex d_s;
        Complex d_tau1;
        Complex d_tau2;
    };

    Jet jet(Complex s, const DelayPair& tau) const {
        const Coeffs c = coeffs(s);
        const Complex e1 = std::exp(-tau.tau1 * s);
        const Complex e2 = std::exp(-tau.tau2 * s);
        const std::array<Complex, 6> e = {1.0, e1, e2, e1 * e1, e2 * e2, e1 * e2};
        const std::array<double, 6> lag = {0.0,       tau.tau1, tau.tau2,
                                           2 * tau.tau1, 2 * tau.tau2, tau.tau1 + tau.tau2};
        Jet j{};
        for (int k = 0; k < 6; ++k) {
            j.value += c.g[k] * e[k];
            j.d_s += (c.dg[k] - lag[k] * c.g[k]) * e[k];
        }
        j.d_tau1 = -s * (c.g[1] * e[1] + 2.0 * c.g[3] * e[3] + c.g[5] * e[5]);
        j.d_tau2 = -s * (c.g[2] * e[2] + 2.0 * c.g[4] * e[4] + c.g[5] * e[5]);
        return j;
    }

    /// Coefficients (ascending) of the zero-delay polynomial.
    std::vector<double> delay_free_coeffs() const {
        const double p = gains.p, d = gains.d;
        if (kind == FactorKind::SecondOrder) {
            const double lam = lambda.real();
            return {p * (1.0 - lam), d * (1.0 - lam), 1.0};
        }
        const double r = lambda.real();
        const double w = std::norm(lambda) + 1.0 - 2.0 * r; // |lambda - 1|^2
        return {p * p * w, 2.0 * d * p * w, d * d * w + 2.0 * p * (1.0 - r), 2.0 * d * (1.0 - r),
                1.0};
    }

    /// |g1(jw)| - sum_k |g_k(jw)|: positive means no imaginary-axis root can
    /// exist at that frequency for any delay pair.
    double magnitude_margin(double omega) const {
        const double p = gains.p, d = gains.d;
        const double beta = std::hypot(p - omega * omega, d * omega);
        const double wsum = p + d * omega;
        if (kind == FactorKind::SecondOrder) return beta - std::abs(lambda) * wsum;
        const double r = std::abs(lambda.real());
        const double q = std::norm(lambda);
        return beta * beta - 2.0 * r * beta * wsum - q * wsum * wsum;
    }

    /// Frequency above which magnitude_margin stays positive; imaginary
    /// roots are confined to [0, bound].
    double crossing_frequency_bound() const {
        const double p = gains.p, d = gains.d;
        const double r = std::abs(lambda.real());
        const double q = std::norm(lambda);
        const double kappa =
            kind == FactorKind::SecondOrder ? std::abs(lambda) : r + std::sqrt(r * r + q);
        // |beta| >= w^2 - p, so margin > 0 once w^2 - p > kappa (p + d w)
        const double cap =
            0.5 * (kappa * d + std::sqrt(kappa * kappa * d * d + 4.0 * (1.0 + kappa) * p));
        const double hi = 1.25 * cap + 1.0;
        const int n_scan = 4096;
        double last_neg = -1.0;
        double prev = magnitude_margin(0.0);
        double prev_w = 0.0;
        double lo_edge = 0.0, hi_edge = 0.0;
        for (int i = 1; i <= n_scan; ++i) {
            const double w = hi * i / n_scan;
            const double h = magnitude_margin(w);
            if (h <= 0.0) last_neg = w;
            if (prev <= 0.0 && h > 0.0) {
                lo_edge = prev_w;
                hi_edge = w;
            }
            prev = h;
            prev_w = w;
        }
        if (last_neg < 0.0) return 0.0; // margin positive everywhere: no crossings
        double a = lo_edge, b = std::max(hi_edge, last_neg + hi / n_scan);
        for (int it = 0; it < 60; ++it) {
            const double mid = 0.5 * (a + b);
            (magnitude_margin(mid) <= 0.0 ? a : b) = mid;
        }
        return b;
    }

    /// Radius enclosing every root with Re s >= 0, from bisection on the
    /// coefficient-magnitude balance along |s| = R (doubled for safety).
    double rhp_root_radius() const {
        const double p = gains.p, d = gains.d;
        const double r = std::abs(lambda.real());
        const double q = std::norm(lambda);
        auto excess = [&](double x) {
            // lower bound of |g1|, upper bound of sum |g_k|, at |s| = x, Re s >= 0
            const double b_lo = x * x - d * x - p;
            const double wsum = p + d * x;
            if (kind == FactorKind::SecondOrder) return b_lo - std::abs(lambda) * wsum;
            const double b_hi = x * x + d * x + p;
            return (b_lo < 0.0 ? -1.0 : b_lo * b_lo) - 2.0 * r * b_hi * wsum - q * wsum * wsum;
        };
        double hi = 1.0 + d + std::sqrt(p);
        while (excess(hi) <= 0.0) hi *= 2.0;
        double lo = 0.0;
        for (int it = 0; it < 60; ++it) {
            const double mid = 0.5 * (lo + hi);
            (excess(mid) <= 0.0 ? lo : hi) = mid;
        }
        return 2.0 * hi;
    }
};

/// Factor inventory for a spectrum: one second-order factor per real
/// eigenvalue (centroid factor first), one fourth-order factor per
/// conjugate pair.
inline std::vector<Factor> factorize(const Spectrum& sp, const Gains& gains) {
    validate_gains(gains);
    std::vector<Factor> out;
    out.reserve(sp.factor_count());
    for (int i = 0; i < sp.factor_count(); ++i) {
        Factor f;
        f.kind = sp.is_pair(i) ? FactorKind::FourthOrder : FactorKind::SecondOrder;
        f.lambda = sp.eigenvalues[i];
        f.gains = gains;
        f.is_centroid = !sp.is_pair(i) && f.lambda.real() == 1.0;
        f.index = i;
        out.push_back(f);
    }
    return out;
}

/// Root census of a factor at zero delay.
struct DelayFreeCensus {
    int unstable = 0;  // roots with Re s > 0
    int at_origin = 0; // structural rigid-body roots of the centroid factor
};

inline DelayFreeCensus delay_free_unstable_count(const Factor& f, double axis_tol = 1e-9) {
    DelayFreeCensus census;
    for (const Complex& root : detail::poly_roots(f.delay_free_coeffs())) {
        if (std::abs(root.real()) <= axis_tol) {
            if (f.is_centroid && std::abs(root) <= axis_tol) {
                ++census.at_origin;
                continue;
            }
            throw NumericalError("factor " + std::to_string(f.index) +
                                 ": marginal at zero delay (root on the imaginary axis)");
        }
        if (root.real() > 0.0) ++census.unstable;
    }
    return census;
}

/// The three Kronecker-structured system matrices of the stacked
/// position/velocity state: zdot = A0 z + B1 z(t-tau1) + B2 z(t-tau2).
struct SystemMatrices {
    Eigen::MatrixXd a0;
    Eigen::MatrixXd b1;
    Eigen::MatrixXd b2;
};

inline SystemMatrices system_matrices(const Eigen::MatrixXd& c, const Gains& g) {
    const int n = static_cast<int>(c.rows());
    SystemMatrices m;
    m.a0 = Eigen::MatrixXd::Zero(2 * n, 2 * n);
    m.b1 = Eigen::MatrixXd::Zero(2 * n, 2 * n);
    m.b2 = Eigen::MatrixXd::Zero(2 * n, 2 * n);
    for (int i = 0; i < n; ++i) {
        m.a0(2 * i, 2 * i + 1) = 1.0;
        m.a0(2 * i + 1, 2 * i) = -g.p;
        m.a0(2 * i + 1, 2 * i + 1) = -g.d;
        for (int k = 0; k < n; ++k) {
            m.b1(2 * i + 1, 2 * k) = g.p * c(i, k);
            m.b2(2 * i + 1, 2 * k + 1) = g.d * c(i, k);
        }
    }
    return m;
}

/// Characteristic function of the full 2n-state system,
/// det(s I - A0 - B1 e^{-tau1 s} - B2 e^{-tau2 s}). Equals the product of
/// all factor evaluations; kept as an independent route for validation.
inline Complex eval_full_system(const Spectrum& sp, const Gains& gains, Complex s,
                                const DelayPair& tau) {
    const SystemMatrices m = system_matrices(sp.c, gains);
    const Complex e1 = std::exp(-tau.tau1 * s);
    const Complex e2 = std::exp(-tau.tau2 * s);
    const int dim = static_cast<int>(m.a0.rows());
    Eigen::MatrixXcd mat = s * Eigen::MatrixXcd::Identity(dim, dim);
    mat -= m.a0.cast<Complex>();
    mat -= e1 * m.b1.cast<Complex>();
    mat -= e2 * m.b2.cast<Complex>();
    return Eigen::PartialPivLU<Eigen::MatrixXcd>(mat).determinant();
}

/// Product of all factor values at s; the factored route of the same
/// characteristic function.
inline Complex eval_factor_product(const std::vector<Factor>& factors, Complex s,
                                   const DelayPair& tau) {
    Complex prod = 1.0;
    for (const Factor& f : factors) prod *= f.eval(s, tau);
    return prod;
}

} // namespace delaynet
