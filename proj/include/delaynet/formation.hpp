#pragma once

#include <cmath>
#include <complex>
#include <string>

#include <Eigen/Dense>

#include "delaynet/errors.hpp"
#include "delaynet/quasipoly.hpp"
#include "delaynet/spectrum.hpp"

namespace delaynet {

namespace detail {

/// Apply kron(m, I2) to a stacked (position, velocity) vector.
inline Eigen::VectorXd apply_block2(const Eigen::MatrixXd& m, const Eigen::VectorXd& v) {
    const int n = static_cast<int>(m.rows());
    Eigen::VectorXd out = Eigen::VectorXd::Zero(2 * n);
    for (int i = 0; i < n; ++i) {
        for (int k = 0; k < n; ++k) {
            if (m(i, k) == 0.0) continue;
            out(2 * i) += m(i, k) * v(2 * k);
            out(2 * i + 1) += m(i, k) * v(2 * k + 1);
        }
    }
    return out;
}

} // namespace detail

/// Transformed steady state: xi_inf = kron(T^-1, I2) z_inf. The desired
/// state must be a rest state (zero velocity slots).
inline Eigen::VectorXd xi_from_z(const Spectrum& sp, const Eigen::VectorXd& z_inf) {
    if (z_inf.size() != 2 * sp.n())
        throw InputError("xi_from_z: expected 2n entries (position, velocity per agent)");
    for (int i = 0; i < sp.n(); ++i)
        if (std::abs(z_inf(2 * i + 1)) > 1e-12)
            throw InputError("xi_from_z: desired steady state must have zero velocities");
    return detail::apply_block2(sp.transform_inv, z_inf);
}

/// Inverse of xi_from_z, for round-trip checks.
inline Eigen::VectorXd z_from_xi(const Spectrum& sp, const Eigen::VectorXd& xi) {
    if (xi.size() != 2 * sp.n()) throw InputError("z_from_xi: expected 2n entries");
    return detail::apply_block2(sp.transform, xi);
}

/// Forcing terms from the transformed steady state. Each disagreement
/// factor inverts the steady-state relation xi = -phi / (P (lambda - 1));
/// for a conjugate pair the 2x2 block is one complex multiplication. The
/// centroid slot is left untouched (zero): its dynamics stay free.
inline Eigen::VectorXd phi_from_xi(const Spectrum& sp, const Gains& gains,
                                   const Eigen::VectorXd& xi_inf) {
    validate_gains(gains);
    if (xi_inf.size() != 2 * sp.n()) throw InputError("phi_from_xi: expected 2n entries");
    Eigen::VectorXd phi = Eigen::VectorXd::Zero(2 * sp.n());
    for (int i = 1; i < sp.factor_count(); ++i) {
        const Complex lam = sp.eigenvalues[static_cast<size_t>(i)];
        if (std::abs(lam - Complex(1.0, 0.0)) < 1e-9)
            throw InputError("phi_from_xi: eigenvalue 1 repeats; the steady-state relations "
                             "are singular (no directed spanning tree)");
        const int col = sp.column_of(i);
        if (!sp.is_pair(i)) {
            phi(2 * col + 1) = -gains.p * (lam.real() - 1.0) * xi_inf(2 * col);
        } else {
            const Complex zeta(xi_inf(2 * col), xi_inf(2 * (col + 1)));
            const Complex val = -gains.p * (lam - 1.0) * zeta;
            phi(2 * col + 1) = val.real();
            phi(2 * (col + 1) + 1) = val.imag();
        }
    }
    return phi;
}

/// Forward steady-state map (the relation phi_from_xi inverts); centroid
/// slot reported as zero.
inline Eigen::VectorXd xi_from_phi(const Spectrum& sp, const Gains& gains,
                                   const Eigen::VectorXd& phi) {
    validate_gains(gains);
    if (phi.size() != 2 * sp.n()) throw InputError("xi_from_phi: expected 2n entries");
    Eigen::VectorXd xi = Eigen::VectorXd::Zero(2 * sp.n());
    for (int i = 1; i < sp.factor_count(); ++i) {
        const Complex lam = sp.eigenvalues[static_cast<size_t>(i)];
        const int col = sp.column_of(i);
        if (!sp.is_pair(i)) {
            xi(2 * col) = -phi(2 * col + 1) / (gains.p * (lam.real() - 1.0));
        } else {
            const Complex pz(phi(2 * col + 1), phi(2 * (col + 1) + 1));
            const Complex zeta = -pz / (gains.p * (lam - Complex(1.0, 0.0)));
            xi(2 * col) = zeta.real();
            xi(2 * (col + 1)) = zeta.imag();
        }
    }
    return xi;
}

/// Forcing vector in agent coordinates: F = kron(T, I2) phi. Only velocity
/// rows can be nonzero, and the centroid forcing must be zero.
inline Eigen::VectorXd force_vector(const Spectrum& sp, const Eigen::VectorXd& phi) {
    if (phi.size() != 2 * sp.n()) throw InputError("force_vector: expected 2n entries");
    for (int i = 0; i < sp.n(); ++i)
        if (std::abs(phi(2 * i)) > 1e-12)
            throw InputError("force_vector: phi position slots must be zero");
    if (std::abs(phi(1)) > 1e-12)
        throw InputError("force_vector: centroid forcing must be zero");
    return detail::apply_block2(sp.transform, phi);
}

/// Full two-axis design bundle for a desired geometric formation given as
/// centroid-relative offsets (n x 2, meters).
struct FormationSpec {
    Eigen::MatrixXd desired_offsets; // n x 2
    Eigen::MatrixXd xi_inf;          // 2n x 2
    Eigen::MatrixXd phi;             // 2n x 2
    Eigen::MatrixXd force;           // 2n x 2
};

inline FormationSpec design_formation(const Spectrum& sp, const Gains& gains,
                                      const Eigen::MatrixXd& offsets) {
    if (offsets.rows() != sp.n() || offsets.cols() != 2)
        throw InputError("design_formation: offsets must be n x 2");
    FormationSpec fs;
    fs.desired_offsets = offsets;
    fs.xi_inf.resize(2 * sp.n(), 2);
    fs.phi.resize(2 * sp.n(), 2);
    fs.force.resize(2 * sp.n(), 2);
    for (int axis = 0; axis < 2; ++axis) {
        Eigen::VectorXd z = Eigen::VectorXd::Zero(2 * sp.n());
        for (int i = 0; i < sp.n(); ++i) z(2 * i) = offsets(i, axis);
        const Eigen::VectorXd xi = xi_from_z(sp, z);
        const Eigen::VectorXd phi = phi_from_xi(sp, gains, xi);
        fs.xi_inf.col(axis) = xi;
        fs.phi.col(axis) = phi;
        fs.force.col(axis) = force_vector(sp, phi);
    }
    return fs;
}

/// Final agent positions implied by a forcing vector and the initial
/// state: disagreement coordinates settle where the forcing pins them,
/// the free centroid coordinate converges to its conserved limit
///   xi_c(inf) = xi_c(0) + (1 + D tau2) xi_c'(0) / (P tau1)
/// (constant pre-history). With tau1 = 0 a moving centroid never stops,
/// so there is no constant limit to report.
inline Eigen::MatrixXd predict_final_positions(const Spectrum& sp, const Gains& gains,
                                               const DelayPair& delays,
                                               const Eigen::MatrixXd& force,
                                               const Eigen::MatrixXd& initial_state) {
    validate_gains(gains);
    validate_delays(delays);
    if (force.rows() != 2 * sp.n() || force.cols() != 2)
        throw InputError("predict_final_positions: force must be 2n x 2");
    if (initial_state.rows() != 2 * sp.n() || initial_state.cols() != 2)
        throw InputError("predict_final_positions: initial state must be 2n x 2");

    Eigen::MatrixXd out(sp.n(), 2);
    for (int axis = 0; axis < 2; ++axis) {
        const Eigen::VectorXd phi = detail::apply_block2(sp.transform_inv, force.col(axis));
        if (std::abs(phi(1)) > 1e-9)
            throw InputError("predict_final_positions: force disturbs the centroid dynamics");
        const Eigen::VectorXd xi0 = detail::apply_block2(sp.transform_inv, initial_state.col(axis));

        Eigen::VectorXd xi = xi_from_phi(sp, gains, phi);
        if (delays.tau1 < 1e-12) {
            if (std::abs(xi0(1)) > 1e-9)
                throw InputError("predict_final_positions: tau1 = 0 with a drifting centroid "
                                 "has no constant limit");
            xi(0) = xi0(0);
        } else {
            xi(0) = xi0(0) + (1.0 + gains.d * delays.tau2) * xi0(1) / (gains.p * delays.tau1);
        }
        const Eigen::VectorXd z = detail::apply_block2(sp.transform, xi);
        for (int i = 0; i < sp.n(); ++i) out(i, axis) = z(2 * i);
    }
    return out;
}

} // namespace delaynet
