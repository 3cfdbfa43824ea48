#pragma once

#include <Eigen/Dense>

#include "zwanzig/liouville.hpp"
#include "zwanzig/spectral.hpp"
#include "zwanzig/state.hpp"

namespace zwanzig {

// Energies in units with hbar = 1.
class Hamiltonian {
public:
    Hamiltonian(HilbertSpace space, Matrix matrix,
                const NumericalPolicy& policy = default_policy())
        : space_(std::move(space)), matrix_(std::move(matrix)) {
        if (matrix_.rows() != space_.total_dim() || matrix_.cols() != space_.total_dim())
            throw InvalidArgument("Hamiltonian: matrix size does not match space dimension");
        if (!is_hermitian(matrix_, policy.hermiticity_tol))
            throw InvariantViolation("Hamiltonian: matrix is not Hermitian within tolerance");
    }

    const HilbertSpace& space() const { return space_; }
    const Matrix& matrix() const { return matrix_; }

private:
    HilbertSpace space_;
    Matrix matrix_;
};

struct TimeGrid {
    double t0 = 0.0;
    double dt = 0.0;
    int steps = 0;

    TimeGrid(double t0_, double dt_, int steps_) : t0(t0_), dt(dt_), steps(steps_) {
        if (dt <= 0.0) throw InvalidArgument("TimeGrid: dt must be positive");
        if (steps < 1) throw InvalidArgument("TimeGrid: steps must be at least 1");
    }

    double time(int step) const { return t0 + dt * step; }
};

// Commutator superoperator L rho = [H, rho] = H rho - rho H.
// Column stacking gives L = I (x) H - H^T (x) I; L is Hermitian as a matrix,
// so its spectrum is real (and -iL generates the unitary group).
inline SuperOperator liouvillian(const Hamiltonian& h) {
    const int d = h.space().total_dim();
    const Matrix& hm = h.matrix();
    Matrix l = Matrix::Zero(d * d, d * d);
    const Matrix ht = hm.transpose();
    for (int j = 0; j < d; ++j) {
        l.block(j * d, j * d, d, d) += hm;
        for (int k = 0; k < d; ++k) l.block(j * d, k * d, d, d).diagonal().array() -= ht(j, k);
    }
    // L maps Hermitian operators to anti-Hermitian ones, so the flag stays off.
    return SuperOperator(h.space(), std::move(l), false);
}

// e^{-iHt} rho e^{+iHt} through the eigendecomposition of H. Trace, spectrum
// and entropy are preserved up to roundoff.
inline DensityOperator propagate_unitary(const DensityOperator& rho, const Hamiltonian& h,
                                         double t,
                                         const NumericalPolicy& policy = default_policy()) {
    if (rho.space() != h.space())
        throw InvalidArgument("propagate_unitary: state and Hamiltonian spaces differ");
    Eigen::SelfAdjointEigenSolver<Matrix> es(h.matrix());
    if (es.info() != Eigen::Success)
        throw NumericGuard("propagate_unitary: eigendecomposition failed");
    const Vector phases =
        (Complex(0.0, -t) * es.eigenvalues().cast<Complex>().array()).exp();
    const Matrix u = es.eigenvectors() * phases.asDiagonal() * es.eigenvectors().adjoint();
    Matrix out = u * rho.matrix() * u.adjoint();
    out = 0.5 * (out + out.adjoint().eval());
    return DensityOperator(rho.space(), std::move(out), policy);
}

inline PureState propagate_unitary(const PureState& psi, const Hamiltonian& h, double t,
                                   const NumericalPolicy& policy = default_policy()) {
    if (psi.space() != h.space())
        throw InvalidArgument("propagate_unitary: state and Hamiltonian spaces differ");
    Eigen::SelfAdjointEigenSolver<Matrix> es(h.matrix());
    if (es.info() != Eigen::Success)
        throw NumericGuard("propagate_unitary: eigendecomposition failed");
    const Vector phases =
        (Complex(0.0, -t) * es.eigenvalues().cast<Complex>().array()).exp();
    Vector v = es.eigenvectors() * (phases.asDiagonal() * (es.eigenvectors().adjoint() * psi.amplitudes()));
    v /= v.norm();
    return PureState(psi.space(), std::move(v), policy);
}

// exp(-i t G) for a superoperator generator G. Normal generators (every
// Liouvillian built here) take the spectral route inside matrix_exponential;
// composed generators like (1-P)L need not be normal and fall back to
// scaling-and-squaring.
inline SuperOperator propagator_superop(const SuperOperator& g, double t) {
    Matrix e = matrix_exponential(Complex(0.0, -t) * g.matrix());
    const bool preserves = detail::preserves_hermiticity(e);
    return SuperOperator(g.space(), std::move(e), preserves);
}

} // namespace zwanzig
