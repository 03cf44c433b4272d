#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <numeric>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "delaynet/errors.hpp"

namespace delaynet {

using Complex = std::complex<double>;

/// Eigenstructure of the consensus matrix in the ordering the rest of the
/// pipeline relies on: the eigenvalue 1 first, then the remaining real
/// eigenvalues in descending order, then one representative per complex
/// conjugate pair (positive imaginary part), pairs sorted by descending
/// real part. `transform` takes C to real block-diagonal form: 1x1 blocks
/// for the reals and 2x2 rotation-scaling blocks
///   [[Re(lam), -Im(lam)], [Im(lam), Re(lam)]]
/// for the pairs.
struct Spectrum {
    Eigen::MatrixXd c;                 // the matrix that was decomposed
    std::vector<Complex> eigenvalues;  // ell reals then m pair representatives
    int ell = 0;                       // count of real eigenvalues
    int m = 0;                         // count of conjugate pairs
    Eigen::MatrixXd transform;         // T
    Eigen::MatrixXd transform_inv;     // T^-1

    int n() const { return static_cast<int>(c.rows()); }
    int factor_count() const { return ell + m; }
    bool is_pair(int i) const { return i >= ell; }

    /// Column of `transform` where eigenvalue i's block starts
    /// (reals own one column, pairs own two).
    int column_of(int i) const { return i < ell ? i : ell + 2 * (i - ell); }

    /// Real block-diagonal form assembled from the stored eigenvalues.
    Eigen::MatrixXd block_diagonal() const {
        Eigen::MatrixXd b = Eigen::MatrixXd::Zero(n(), n());
        for (int i = 0; i < factor_count(); ++i) {
            const int c0 = column_of(i);
            if (!is_pair(i)) {
                b(c0, c0) = eigenvalues[i].real();
            } else {
                const double re = eigenvalues[i].real(), im = eigenvalues[i].imag();
                b(c0, c0) = re;
                b(c0, c0 + 1) = -im;
                b(c0 + 1, c0) = im;
                b(c0 + 1, c0 + 1) = re;
            }
        }
        return b;
    }
};

namespace detail {

// Rotate a complex eigenvector so its first significant component is real
// and positive, then scale to unit 2-norm. Fixes the phase/sign freedom so
// the transform is reproducible across runs and platforms.
inline Eigen::VectorXcd normalize_eigenvector(Eigen::VectorXcd v) {
    const double norm = v.norm();
    if (norm == 0.0) throw NumericalError("spectrum: zero eigenvector");
    v /= norm;
    for (int i = 0; i < v.size(); ++i) {
        const double mag = std::abs(v(i));
        if (mag > 1e-9) {
            v *= std::conj(v(i)) / mag;
            break;
        }
    }
    return v;
}

} // namespace detail

/// Eigendecompose a row-stochastic consensus matrix into the Spectrum form.
/// Repeated eigenvalues are accepted as long as the matrix stays
/// diagonalizable; a defective matrix is rejected.
inline Spectrum spectrum(const Eigen::MatrixXd& c_matrix, double tol = 1e-9) {
    const int n = static_cast<int>(c_matrix.rows());
    if (n < 1 || c_matrix.cols() != n)
        throw InputError("spectrum: matrix must be square and non-empty");
    for (int i = 0; i < n; ++i)
        if (std::abs(c_matrix.row(i).sum() - 1.0) > 1e-9)
            throw InputError("spectrum: row " + std::to_string(i + 1) +
                             " of C does not sum to 1 (not row-stochastic)");

    Eigen::EigenSolver<Eigen::MatrixXd> es(c_matrix);
    if (es.info() != Eigen::Success)
        throw NumericalError("spectrum: eigensolver failed to converge");

    const Eigen::VectorXcd vals = es.eigenvalues();
    const Eigen::MatrixXcd vecs = es.eigenvectors();

    // A defective C has no full eigenbasis; the block form does not exist.
    Eigen::JacobiSVD<Eigen::MatrixXcd> svd(vecs);
    const double cond_floor = svd.singularValues()(n - 1) / svd.singularValues()(0);
    if (cond_floor < 1e-8)
        throw NumericalError("spectrum: repeated defective eigenvalue, "
                             "C is not diagonalizable");

    struct Entry {
        Complex lambda;
        int index;
        bool pair;
    };
    std::vector<Entry> entries;
    for (int i = 0; i < n; ++i) {
        Complex lam = vals(i);
        if (std::abs(lam.imag()) <= tol) {
            lam = Complex(std::abs(lam.real() - 1.0) <= 1e-6 ? 1.0 : lam.real(), 0.0);
            entries.push_back({lam, i, false});
        } else if (lam.imag() > 0.0) {
            entries.push_back({lam, i, true});
        } // negative-imag members are the conjugates of the kept ones
    }

    std::stable_sort(entries.begin(), entries.end(), [](const Entry& a, const Entry& b) {
        if (a.pair != b.pair) return !a.pair; // reals first
        if (a.lambda.real() != b.lambda.real()) return a.lambda.real() > b.lambda.real();
        return a.lambda.imag() < b.lambda.imag();
    });
    if (entries.empty() || entries.front().lambda != Complex(1.0, 0.0))
        throw NumericalError("spectrum: eigenvalue 1 not found; "
                             "C is not row-stochastic to working precision");

    Spectrum s;
    s.c = c_matrix;
    s.transform = Eigen::MatrixXd::Zero(n, n);
    int col = 0;
    for (const auto& e : entries) {
        s.eigenvalues.push_back(e.lambda);
        const Eigen::VectorXcd v = detail::normalize_eigenvector(vecs.col(e.index));
        if (!e.pair) {
            ++s.ell;
            // phase-fixed eigenvector of a real eigenvalue is real
            s.transform.col(col) = v.real();
            col += 1;
        } else {
            ++s.m;
            s.transform.col(col) = v.imag();
            s.transform.col(col + 1) = v.real();
            col += 2;
        }
    }

    Eigen::PartialPivLU<Eigen::MatrixXd> lu(s.transform);
    s.transform_inv = lu.inverse();
    const double id_err =
        (s.transform * s.transform_inv - Eigen::MatrixXd::Identity(n, n)).cwiseAbs().maxCoeff();
    if (!std::isfinite(id_err) || id_err > 1e-6)
        throw NumericalError("spectrum: transform is numerically singular "
                             "(near-defective eigenstructure)");
    const double rec_err =
        (s.transform * s.block_diagonal() * s.transform_inv - c_matrix).cwiseAbs().maxCoeff();
    if (rec_err > 1e-8)
        throw NumericalError("spectrum: block-diagonal reconstruction failed, "
                             "residual " + std::to_string(rec_err));
    return s;
}

} // namespace delaynet
