#pragma once

#include <complex>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "zwanzig/errors.hpp"
#include "zwanzig/hilbert.hpp"
#include "zwanzig/policy.hpp"

namespace zwanzig {

using Complex = std::complex<double>;
using Matrix = Eigen::MatrixXcd;
using Vector = Eigen::VectorXcd;
using RealVector = Eigen::VectorXd;

inline double max_abs(const Matrix& m) { return m.cwiseAbs().maxCoeff(); }

inline bool is_hermitian(const Matrix& m, double tol) {
    return m.rows() == m.cols() && max_abs(m - m.adjoint()) <= tol;
}

// Normalized state vector on a composite space.
class PureState {
public:
    PureState(HilbertSpace space, Vector amplitudes,
              const NumericalPolicy& policy = default_policy())
        : space_(std::move(space)), amplitudes_(std::move(amplitudes)) {
        if (amplitudes_.size() != space_.total_dim())
            throw InvalidArgument("PureState: amplitude length does not match space dimension");
        const double norm = amplitudes_.norm();
        if (std::abs(norm - 1.0) > policy.unit_norm_tol)
            throw InvariantViolation("PureState: norm deviates from 1 by " +
                                     std::to_string(std::abs(norm - 1.0)));
    }

    static PureState basis_state(const HilbertSpace& space, int index) {
        Vector v = Vector::Zero(space.total_dim());
        if (index < 0 || index >= space.total_dim())
            throw InvalidArgument("PureState::basis_state: index out of range");
        v(index) = 1.0;
        return PureState(space, std::move(v));
    }

    const HilbertSpace& space() const { return space_; }
    const Vector& amplitudes() const { return amplitudes_; }

private:
    HilbertSpace space_;
    Vector amplitudes_;
};

// Positive unit-trace operator; the central state object. Invariants are enforced
// at construction against the supplied policy (solvers pass a looser one).
class DensityOperator {
public:
    DensityOperator(HilbertSpace space, Matrix matrix,
                    const NumericalPolicy& policy = default_policy())
        : space_(std::move(space)), matrix_(std::move(matrix)) {
        const int d = space_.total_dim();
        if (matrix_.rows() != d || matrix_.cols() != d)
            throw InvalidArgument("DensityOperator: matrix size does not match space dimension");
        if (!is_hermitian(matrix_, policy.hermiticity_tol))
            throw InvariantViolation("DensityOperator: matrix is not Hermitian within tolerance");
        const double trace_dev = std::abs(matrix_.trace() - Complex(1.0, 0.0));
        if (trace_dev > policy.unit_trace_tol)
            throw InvariantViolation("DensityOperator: trace deviates from 1 by " +
                                     std::to_string(trace_dev));
        Eigen::SelfAdjointEigenSolver<Matrix> es(matrix_, Eigen::EigenvaluesOnly);
        min_eigenvalue_ = es.eigenvalues().minCoeff();
        if (min_eigenvalue_ < policy.positivity_floor)
            throw InvariantViolation("DensityOperator: smallest eigenvalue " +
                                     std::to_string(min_eigenvalue_) + " below positivity floor");
    }

    static DensityOperator pure(const PureState& psi,
                                const NumericalPolicy& policy = default_policy()) {
        Matrix m = psi.amplitudes() * psi.amplitudes().adjoint();
        return DensityOperator(psi.space(), std::move(m), policy);
    }

    static DensityOperator maximally_mixed(const HilbertSpace& space) {
        const int d = space.total_dim();
        return DensityOperator(space, Matrix::Identity(d, d) / static_cast<double>(d));
    }

    const HilbertSpace& space() const { return space_; }
    const Matrix& matrix() const { return matrix_; }
    int dim() const { return space_.total_dim(); }

    double trace_deviation() const { return std::abs(matrix_.trace() - Complex(1.0, 0.0)); }
    double min_eigenvalue() const { return min_eigenvalue_; }
    double purity() const { return (matrix_ * matrix_).trace().real(); }

private:
    HilbertSpace space_;
    Matrix matrix_;
    double min_eigenvalue_ = 0.0;
};

// Kronecker composite on the concatenated factor list. Labels must be disjoint.
inline DensityOperator tensor(const DensityOperator& a, const DensityOperator& b,
                              const NumericalPolicy& policy = default_policy()) {
    for (const auto& f : b.space().factors())
        if (a.space().has_factor(f.label))
            throw InvalidArgument("tensor: factor label '" + f.label + "' appears on both sides");
    std::vector<Factor> factors = a.space().factors();
    factors.insert(factors.end(), b.space().factors().begin(), b.space().factors().end());
    HilbertSpace space(std::move(factors), policy);

    const int da = a.dim(), db = b.dim();
    Matrix m(da * db, da * db);
    for (int i = 0; i < da; ++i)
        for (int j = 0; j < da; ++j)
            m.block(i * db, j * db, db, db) = a.matrix()(i, j) * b.matrix();
    return DensityOperator(space, std::move(m), policy);
}

inline PureState tensor(const PureState& a, const PureState& b,
                        const NumericalPolicy& policy = default_policy()) {
    for (const auto& f : b.space().factors())
        if (a.space().has_factor(f.label))
            throw InvalidArgument("tensor: factor label '" + f.label + "' appears on both sides");
    std::vector<Factor> factors = a.space().factors();
    factors.insert(factors.end(), b.space().factors().begin(), b.space().factors().end());
    HilbertSpace space(std::move(factors), policy);

    const int da = a.space().total_dim(), db = b.space().total_dim();
    Vector v(da * db);
    for (int i = 0; i < da; ++i) v.segment(i * db, db) = a.amplitudes()(i) * b.amplitudes();
    return PureState(space, std::move(v), policy);
}

// Matrix-level partial trace; works for non-Hermitian operators too (needed
// for cross terms like |a><b|). The kept factors retain their original
// relative order.
inline Matrix partial_trace_matrix(const HilbertSpace& space, const Matrix& m,
                                   const std::vector<std::string>& keep) {
    if (keep.empty()) throw InvalidArgument("partial_trace: keep set is empty");
    if (m.rows() != space.total_dim() || m.cols() != space.total_dim())
        throw DimensionError("partial_trace: matrix size does not match space");
    const IndexSplit split = split_indices(space, keep);
    const int dk = split.selected_dim;

    // Group flat indices by their traced component; within a group the kept
    // component enumerates 0..dk-1 in order.
    std::vector<std::vector<int>> groups(static_cast<std::size_t>(split.rest_dim));
    for (auto& g : groups) g.reserve(static_cast<std::size_t>(dk));
    for (int flat = 0; flat < space.total_dim(); ++flat)
        groups[static_cast<std::size_t>(split.rest_of[flat])].push_back(flat);

    Matrix reduced = Matrix::Zero(dk, dk);
    for (const auto& g : groups)
        for (int a = 0; a < dk; ++a)
            for (int b = 0; b < dk; ++b)
                reduced(a, b) += m(g[static_cast<std::size_t>(a)],
                                   g[static_cast<std::size_t>(b)]);
    return reduced;
}

// Trace out every factor not listed in `keep`.
inline DensityOperator partial_trace(const DensityOperator& rho,
                                     const std::vector<std::string>& keep,
                                     const NumericalPolicy& policy = default_policy()) {
    Matrix reduced = partial_trace_matrix(rho.space(), rho.matrix(), keep);
    return DensityOperator(rho.space().subspace(keep), std::move(reduced), policy);
}

// Lift a single-factor operator to the whole space (identity elsewhere).
inline Matrix embed_factor(const HilbertSpace& space, const std::string& label,
                           const Matrix& op) {
    const std::size_t k = space.factor_index(label);
    const int df = space.factors()[k].dim;
    if (op.rows() != df || op.cols() != df)
        throw DimensionError("embed_factor: operator size does not match factor dimension");
    const int d = space.total_dim();
    // Offsets of the factor's index within the flat index.
    int radix_below = 1;
    for (std::size_t j = k + 1; j < space.factors().size(); ++j)
        radix_below *= space.factors()[j].dim;
    Matrix out = Matrix::Zero(d, d);
    for (int r = 0; r < d; ++r) {
        const int rk = (r / radix_below) % df;
        const int base = r - rk * radix_below;
        for (int ck = 0; ck < df; ++ck) out(r, base + ck * radix_below) = op(rk, ck);
    }
    return out;
}

// Reorder tensor factors. `front` lists the factors to move in front (original
// relative order preserved on both sides of the cut).
inline PureState regroup_front(const PureState& psi, const std::vector<std::string>& front,
                               const NumericalPolicy& policy = default_policy()) {
    const IndexSplit split = split_indices(psi.space(), front);
    const auto old_of_new = regroup_permutation(split);

    std::vector<Factor> factors;
    std::vector<std::string> rest;
    for (const auto& f : psi.space().factors())
        if (std::find(front.begin(), front.end(), f.label) != front.end()) factors.push_back(f);
    for (const auto& f : psi.space().factors())
        if (std::find(front.begin(), front.end(), f.label) == front.end()) factors.push_back(f);

    Vector v(psi.amplitudes().size());
    for (Eigen::Index i = 0; i < v.size(); ++i)
        v(i) = psi.amplitudes()(old_of_new[static_cast<std::size_t>(i)]);
    return PureState(HilbertSpace(std::move(factors)), std::move(v), policy);
}

// Half the trace norm of rho - sigma; the standard distinguishability metric.
inline double trace_distance(const DensityOperator& rho, const DensityOperator& sigma) {
    if (rho.space() != sigma.space())
        throw InvalidArgument("trace_distance: states live on different spaces");
    Eigen::SelfAdjointEigenSolver<Matrix> es(rho.matrix() - sigma.matrix(), Eigen::EigenvaluesOnly);
    return 0.5 * es.eigenvalues().cwiseAbs().sum();
}

inline double trace_distance(const Matrix& a, const Matrix& b) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(a - b, Eigen::EigenvaluesOnly);
    return 0.5 * es.eigenvalues().cwiseAbs().sum();
}

} // namespace zwanzig
