#pragma once

#include <Eigen/Dense>
#include <unsupported/Eigen/MatrixFunctions>

#include "zwanzig/errors.hpp"
#include "zwanzig/state.hpp"

namespace zwanzig {

// Eigendecomposition of a Hermitian matrix with descending eigenvalues and
// orthonormal eigenvector columns.
struct SpectralDecomposition {
    RealVector eigenvalues;
    Matrix eigenvectors;

    Matrix reconstruct() const {
        return eigenvectors * eigenvalues.asDiagonal() * eigenvectors.adjoint();
    }
};

inline SpectralDecomposition spectral(const Matrix& h,
                                      const NumericalPolicy& policy = default_policy()) {
    if (!is_hermitian(h, policy.hermitian_input_tol))
        throw InvalidArgument("spectral: input is not Hermitian within tolerance");
    Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (h + h.adjoint()));
    if (es.info() != Eigen::Success)
        throw NumericGuard("spectral: eigendecomposition failed to converge");

    const Eigen::Index d = h.rows();
    SpectralDecomposition out;
    out.eigenvalues.resize(d);
    out.eigenvectors.resize(d, d);
    for (Eigen::Index i = 0; i < d; ++i) {
        out.eigenvalues(i) = es.eigenvalues()(d - 1 - i);
        out.eigenvectors.col(i) = es.eigenvectors().col(d - 1 - i);
    }
    if (max_abs(out.reconstruct() - h) > policy.reconstruction_tol)
        throw InvariantViolation("spectral: reconstruction error above tolerance");
    return out;
}

namespace detail {

inline bool is_normal(const Matrix& m, double rel_tol = 1e-12) {
    const double scale = std::max(1.0, max_abs(m));
    return max_abs(m * m.adjoint() - m.adjoint() * m) <= rel_tol * scale * scale;
}

} // namespace detail

// exp(A). Normal generators go through a Schur (effectively spectral) route;
// everything else falls back to scaling-and-squaring.
inline Matrix matrix_exponential(const Matrix& a) {
    if (a.rows() != a.cols()) throw InvalidArgument("matrix_exponential: matrix is not square");
    if (detail::is_normal(a)) {
        Eigen::ComplexSchur<Matrix> schur(a);
        if (schur.info() == Eigen::Success) {
            // For a normal matrix the Schur form is diagonal up to roundoff.
            const Matrix& t = schur.matrixT();
            Matrix off = t;
            off.diagonal().setZero();
            if (max_abs(off) <= 1e-12 * std::max(1.0, max_abs(t))) {
                Vector exp_diag = t.diagonal().array().exp();
                return schur.matrixU() * exp_diag.asDiagonal() * schur.matrixU().adjoint();
            }
        }
    }
    return a.exp();
}

} // namespace zwanzig
