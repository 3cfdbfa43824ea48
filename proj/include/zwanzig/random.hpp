#pragma once

#include <vector>

#include "zwanzig/rng.hpp"
#include "zwanzig/state.hpp"

namespace zwanzig {

// Haar-distributed pure state: normalized complex gaussian vector.
inline PureState random_pure_state(const HilbertSpace& space, RandomStream& rng,
                                   const NumericalPolicy& policy = default_policy()) {
    const int d = space.total_dim();
    Vector v(d);
    for (int i = 0; i < d; ++i) v(i) = Complex(rng.gaussian(), rng.gaussian());
    v /= v.norm();
    return PureState(space, std::move(v), policy);
}

// Full-rank random state: G G^dagger / tr(G G^dagger) with Ginibre G.
inline DensityOperator random_density(const HilbertSpace& space, RandomStream& rng,
                                      const NumericalPolicy& policy = default_policy()) {
    const int d = space.total_dim();
    Matrix g(d, d);
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) g(i, j) = Complex(rng.gaussian(), rng.gaussian());
    Matrix rho = g * g.adjoint();
    rho /= rho.trace().real();
    rho = 0.5 * (rho + rho.adjoint().eval());
    return DensityOperator(space, std::move(rho), policy);
}

// GUE-style Hermitian matrix; scale sets the standard deviation of the
// off-diagonal entries.
inline Matrix random_hermitian(int dim, RandomStream& rng, double scale = 1.0) {
    Matrix a(dim, dim);
    for (int i = 0; i < dim; ++i)
        for (int j = 0; j < dim; ++j) a(i, j) = Complex(rng.gaussian(), rng.gaussian());
    return scale * 0.5 * (a + a.adjoint().eval());
}

// Haar unitary: QR of a Ginibre matrix with the R diagonal phased away.
inline Matrix random_unitary(int dim, RandomStream& rng) {
    Matrix g(dim, dim);
    for (int i = 0; i < dim; ++i)
        for (int j = 0; j < dim; ++j) g(i, j) = Complex(rng.gaussian(), rng.gaussian());
    Eigen::HouseholderQR<Matrix> qr(g);
    Matrix q = qr.householderQ();
    const Matrix r = qr.matrixQR().triangularView<Eigen::Upper>();
    for (int j = 0; j < dim; ++j) {
        const Complex rj = r(j, j);
        const double mag = std::abs(rj);
        q.col(j) *= (mag > 0.0) ? rj / mag : Complex(1.0, 0.0);
    }
    return q;
}

// Random partition of {0,...,dim-1} into `blocks` nonempty contiguous-size
// groups in a Haar-random basis. Returns the projector list.
inline std::vector<Matrix> random_projector_partition(int dim, int blocks, RandomStream& rng) {
    if (blocks < 1 || blocks > dim)
        throw InvalidArgument("random_projector_partition: blocks must lie in [1, dim]");
    // Sizes: start with 1 each, distribute the remainder uniformly.
    std::vector<int> sizes(blocks, 1);
    for (int extra = dim - blocks; extra > 0; --extra)
        sizes[static_cast<int>(rng.below(static_cast<std::uint64_t>(blocks)))] += 1;
    const Matrix u = random_unitary(dim, rng);
    std::vector<Matrix> projectors;
    projectors.reserve(blocks);
    int offset = 0;
    for (int b = 0; b < blocks; ++b) {
        const Matrix cols = u.middleCols(offset, sizes[b]);
        projectors.push_back(cols * cols.adjoint());
        offset += sizes[b];
    }
    return projectors;
}

} // namespace zwanzig
