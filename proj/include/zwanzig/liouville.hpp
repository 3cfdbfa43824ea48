#pragma once

#include <Eigen/Dense>

#include "zwanzig/errors.hpp"
#include "zwanzig/state.hpp"

namespace zwanzig {

// Vectorization convention, fixed once for the whole library:
//
//   vec(A) stacks the COLUMNS of A, so vec(A)[j*d + i] = A(i, j).
//
// Consequences used throughout:
//   vec(A X B) = (B^T (x) A) vec(X)
//   <vec(A), vec(B)> = tr(A† B)   (Hilbert-Schmidt inner product)
//
// Every superoperator constructor in this library builds its matrix against
// this ordering; mixing conventions is the classic Liouville-space bug.

inline Vector vectorize(const Matrix& a) {
    return Eigen::Map<const Vector>(a.data(), a.size());
}

inline Vector vectorize(const DensityOperator& rho) { return vectorize(rho.matrix()); }

inline Matrix devectorize(const Vector& v, int dim) {
    if (v.size() != static_cast<Eigen::Index>(dim) * dim)
        throw InvalidArgument("devectorize: length " + std::to_string(v.size()) +
                              " does not match dimension " + std::to_string(dim) + "^2");
    return Eigen::Map<const Matrix>(v.data(), dim, dim);
}

namespace detail {

// Permutation T with T vec(X) = vec(X^T).
inline Eigen::PermutationMatrix<Eigen::Dynamic> transpose_permutation(int d) {
    Eigen::PermutationMatrix<Eigen::Dynamic> t(d * d);
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) t.indices()[j * d + i] = i * d + j;
    return t;
}

// A map S preserves Hermiticity iff conj(S) = T S T with T the transpose
// permutation above. Exact structural test, no probing.
inline bool preserves_hermiticity(const Matrix& s, double tol = 1e-10) {
    const int d2 = static_cast<int>(s.rows());
    int d = static_cast<int>(std::lround(std::sqrt(static_cast<double>(d2))));
    if (d * d != d2) return false;
    const auto t = transpose_permutation(d);
    return max_abs(s.conjugate() - t * s * t) <= tol * std::max(1.0, max_abs(s));
}

} // namespace detail

// Linear map on vectorized operators (Liouvillian, projections, propagators).
class SuperOperator {
public:
    SuperOperator(HilbertSpace space, Matrix matrix, bool hermiticity_preserving)
        : space_(std::move(space)), matrix_(std::move(matrix)),
          hermiticity_preserving_(hermiticity_preserving) {
        const Eigen::Index d2 = static_cast<Eigen::Index>(space_.total_dim()) * space_.total_dim();
        if (matrix_.rows() != d2 || matrix_.cols() != d2)
            throw InvalidArgument("SuperOperator: matrix size does not match dim^2");
    }

    static SuperOperator identity(const HilbertSpace& space) {
        const Eigen::Index d2 = static_cast<Eigen::Index>(space.total_dim()) * space.total_dim();
        return SuperOperator(space, Matrix::Identity(d2, d2), true);
    }

    const HilbertSpace& space() const { return space_; }
    const Matrix& matrix() const { return matrix_; }
    bool hermiticity_preserving() const { return hermiticity_preserving_; }

    Matrix apply(const Matrix& op) const {
        if (op.rows() != space_.total_dim() || op.cols() != space_.total_dim())
            throw InvalidArgument("SuperOperator::apply: operand size mismatch");
        return devectorize(matrix_ * vectorize(op), space_.total_dim());
    }

    DensityOperator apply(const DensityOperator& rho,
                          const NumericalPolicy& policy = default_policy()) const {
        if (rho.space() != space_)
            throw InvalidArgument("SuperOperator::apply: state lives on a different space");
        return DensityOperator(space_, apply(rho.matrix()), policy);
    }

private:
    HilbertSpace space_;
    Matrix matrix_;
    bool hermiticity_preserving_;
};

} // namespace zwanzig
