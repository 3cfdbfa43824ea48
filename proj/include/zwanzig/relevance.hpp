#pragma once

#include <cmath>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "zwanzig/liouville.hpp"
#include "zwanzig/state.hpp"

namespace zwanzig {

struct SubspaceBlock {
    std::string label;
    Matrix projector;
};

// Orthogonal resolution of the identity: Hermitian idempotent blocks that are
// mutually orthogonal and sum to 1. Block dimension is tr(P), which is an
// integer for an exact projector.
class SubspacePartition {
public:
    SubspacePartition(HilbertSpace space, std::vector<SubspaceBlock> blocks,
                      const NumericalPolicy& policy = default_policy())
        : space_(std::move(space)), blocks_(std::move(blocks)) {
        const int d = space_.total_dim();
        if (blocks_.empty()) throw InvalidArgument("SubspacePartition: needs at least one block");
        Matrix sum = Matrix::Zero(d, d);
        for (const auto& b : blocks_) {
            if (b.projector.rows() != d || b.projector.cols() != d)
                throw DimensionError("SubspacePartition: projector size does not match space");
            if (!is_hermitian(b.projector, policy.hermiticity_tol))
                throw InvariantViolation("SubspacePartition: block '" + b.label +
                                         "' is not Hermitian");
            if (max_abs(b.projector * b.projector - b.projector) > policy.idempotence_tol)
                throw InvariantViolation("SubspacePartition: block '" + b.label +
                                         "' is not idempotent");
            const double tr = b.projector.trace().real();
            const double rounded = std::round(tr);
            if (rounded < 1.0 || std::abs(tr - rounded) > policy.idempotence_tol)
                throw InvariantViolation("SubspacePartition: block '" + b.label +
                                         "' has non-integer or zero rank");
            dims_.push_back(static_cast<int>(rounded));
            sum += b.projector;
        }
        for (std::size_t a = 0; a < blocks_.size(); ++a)
            for (std::size_t b = a + 1; b < blocks_.size(); ++b)
                if (max_abs(blocks_[a].projector * blocks_[b].projector) > policy.idempotence_tol)
                    throw InvariantViolation("SubspacePartition: blocks '" + blocks_[a].label +
                                             "' and '" + blocks_[b].label +
                                             "' are not orthogonal");
        if (max_abs(sum - Matrix::Identity(d, d)) > policy.idempotence_tol)
            throw InvariantViolation("SubspacePartition: blocks do not sum to the identity");
    }

    // Blocks spanned by groups of computational-basis indices. Every index in
    // [0, dim) must appear exactly once across the groups.
    static SubspacePartition from_index_groups(
        const HilbertSpace& space,
        const std::vector<std::pair<std::string, std::vector<int>>>& groups,
        const NumericalPolicy& policy = default_policy()) {
        const int d = space.total_dim();
        std::vector<SubspaceBlock> blocks;
        std::vector<bool> seen(d, false);
        for (const auto& [label, idx] : groups) {
            Matrix p = Matrix::Zero(d, d);
            for (int i : idx) {
                if (i < 0 || i >= d)
                    throw InvalidArgument("from_index_groups: index out of range in '" + label + "'");
                if (seen[i])
                    throw InvalidArgument("from_index_groups: index repeated across groups");
                seen[i] = true;
                p(i, i) = 1.0;
            }
            blocks.push_back({label, std::move(p)});
        }
        for (int i = 0; i < d; ++i)
            if (!seen[i]) throw InvalidArgument("from_index_groups: groups do not cover the space");
        return SubspacePartition(space, std::move(blocks), policy);
    }

    const HilbertSpace& space() const { return space_; }
    const std::vector<SubspaceBlock>& blocks() const { return blocks_; }
    std::size_t size() const { return blocks_.size(); }
    int block_dim(std::size_t i) const { return dims_.at(i); }

private:
    HilbertSpace space_;
    std::vector<SubspaceBlock> blocks_;
    std::vector<int> dims_;
};

namespace detail {

inline void check_orthonormal_basis(const Matrix& basis, int dim,
                                    const NumericalPolicy& policy) {
    if (basis.rows() != dim || basis.cols() != dim)
        throw DimensionError("dephase: basis must be square and match the space");
    if (max_abs(basis.adjoint() * basis - Matrix::Identity(dim, dim)) >
        policy.orthonormality_tol)
        throw InvalidArgument("dephase: basis columns are not orthonormal");
}

} // namespace detail

// Sides of a factor bipartition, by label. Complement is implicit.
struct FactorBipartition {
    std::vector<std::string> first;
    std::vector<std::string> second;
};

inline FactorBipartition bipartition_of(const HilbertSpace& space,
                                        const std::vector<std::string>& first) {
    if (first.empty())
        throw InvalidArgument("bipartition: first side is empty");
    for (std::size_t i = 0; i < first.size(); ++i) {
        space.factor_index(first[i]);  // throws on unknown label
        for (std::size_t j = i + 1; j < first.size(); ++j)
            if (first[i] == first[j])
                throw InvalidArgument("bipartition: factor '" + first[i] + "' listed twice");
    }
    FactorBipartition out;
    out.first = first;
    for (const auto& f : space.factors()) {
        bool chosen = false;
        for (const auto& s : first)
            if (s == f.label) chosen = true;
        if (!chosen) out.second.push_back(f.label);
    }
    if (out.second.empty())
        throw InvalidArgument("bipartition: second side is empty");
    return out;
}

// Idempotent relevance map. Linear kinds carry their matrix representation;
// the marginal-product kind is nonlinear and has none, which restricts it to
// dynamics that apply the map directly between unitary strides.
class ZwanzigProjection {
public:
    enum class Kind { dephase, coarse_grain_equipartition, block_dephase, product_of_marginals };

    static ZwanzigProjection dephasing(const HilbertSpace& space, Matrix basis,
                                       const NumericalPolicy& policy = default_policy()) {
        detail::check_orthonormal_basis(basis, space.total_dim(), policy);
        ZwanzigProjection p(Kind::dephase, space);
        p.basis_ = std::move(basis);
        p.build_superop();
        return p;
    }

    static ZwanzigProjection equipartition(SubspacePartition part) {
        ZwanzigProjection p(Kind::coarse_grain_equipartition, part.space());
        p.partition_ = std::move(part);
        p.build_superop();
        return p;
    }

    static ZwanzigProjection block_dephasing(SubspacePartition part) {
        ZwanzigProjection p(Kind::block_dephase, part.space());
        p.partition_ = std::move(part);
        p.build_superop();
        return p;
    }

    static ZwanzigProjection marginal_product(const HilbertSpace& space,
                                              const std::vector<std::string>& first_side) {
        ZwanzigProjection p(Kind::product_of_marginals, space);
        p.split_ = bipartition_of(space, first_side);
        return p;
    }

    Kind kind() const { return kind_; }
    bool linear() const { return kind_ != Kind::product_of_marginals; }
    const HilbertSpace& space() const { return space_; }

    const SubspacePartition& partition() const {
        if (!partition_) throw InvalidArgument("projection has no partition");
        return *partition_;
    }
    const FactorBipartition& split() const {
        if (!split_) throw InvalidArgument("projection has no bipartition");
        return *split_;
    }

    const SuperOperator& superop() const {
        if (!superop_)
            throw LinearityError(
                "projection is nonlinear; no superoperator representation exists");
        return *superop_;
    }

    Matrix apply(const Matrix& m) const;

    DensityOperator apply(const DensityOperator& rho,
                          const NumericalPolicy& policy = default_policy()) const {
        if (rho.space() != space_)
            throw InvalidArgument("projection applied to a state on another space");
        Matrix out = apply(rho.matrix());
        out = 0.5 * (out + out.adjoint().eval());
        return DensityOperator(space_, std::move(out), policy);
    }

private:
    ZwanzigProjection(Kind kind, HilbertSpace space) : kind_(kind), space_(std::move(space)) {}

    void build_superop();

    Kind kind_;
    HilbertSpace space_;
    Matrix basis_;
    std::optional<SubspacePartition> partition_;
    std::optional<FactorBipartition> split_;
    std::optional<SuperOperator> superop_;
};

inline Matrix ZwanzigProjection::apply(const Matrix& m) const {
    const int d = space_.total_dim();
    if (m.rows() != d || m.cols() != d)
        throw DimensionError("projection applied to a matrix of the wrong size");
    switch (kind_) {
        case Kind::dephase: {
            Matrix a = basis_.adjoint() * m * basis_;
            Matrix diag = a.diagonal().asDiagonal();
            return basis_ * diag * basis_.adjoint();
        }
        case Kind::block_dephase: {
            Matrix out = Matrix::Zero(d, d);
            for (const auto& b : partition_->blocks()) out += b.projector * m * b.projector;
            return out;
        }
        case Kind::coarse_grain_equipartition: {
            Matrix out = Matrix::Zero(d, d);
            for (std::size_t i = 0; i < partition_->size(); ++i) {
                const Matrix& p = partition_->blocks()[i].projector;
                const Complex w = (p * m).trace();
                out += (w / static_cast<double>(partition_->block_dim(i))) * p;
            }
            return out;
        }
        case Kind::product_of_marginals: {
            // Marginal of each side in regrouped (first, second) order, then
            // the Kronecker product mapped back to the original index order.
            const IndexSplit split = split_indices(space_, split_->first);
            Matrix m1 = Matrix::Zero(split.selected_dim, split.selected_dim);
            Matrix m2 = Matrix::Zero(split.rest_dim, split.rest_dim);
            for (int r = 0; r < d; ++r)
                for (int c = 0; c < d; ++c) {
                    if (split.rest_of[r] == split.rest_of[c])
                        m1(split.selected_of[r], split.selected_of[c]) += m(r, c);
                    if (split.selected_of[r] == split.selected_of[c])
                        m2(split.rest_of[r], split.rest_of[c]) += m(r, c);
                }
            // tr m appears twice in the raw product; normalize by it so unit
            // trace maps to unit trace. Guarded for near-traceless input.
            const Complex tr = m.trace();
            if (std::abs(tr) < 1e-14)
                throw InvalidArgument(
                    "product of marginals is undefined for traceless operators");
            Matrix out(d, d);
            for (int r = 0; r < d; ++r)
                for (int c = 0; c < d; ++c)
                    out(r, c) = m1(split.selected_of[r], split.selected_of[c]) *
                                m2(split.rest_of[r], split.rest_of[c]) / tr;
            return out;
        }
    }
    throw InvariantViolation("projection kind is corrupt");
}

inline void ZwanzigProjection::build_superop() {
    const int d = space_.total_dim();
    Matrix s = Matrix::Zero(d * d, d * d);
    switch (kind_) {
        case Kind::dephase: {
            // S = sum_i conj(P_i) (x) P_i over the rank-1 basis projectors.
            for (int i = 0; i < d; ++i) {
                const Matrix p = basis_.col(i) * basis_.col(i).adjoint();
                const Matrix pc = p.conjugate();
                for (int r = 0; r < d; ++r)
                    for (int c = 0; c < d; ++c)
                        s.block(r * d, c * d, d, d) += pc(r, c) * p;
            }
            break;
        }
        case Kind::block_dephase: {
            for (const auto& b : partition_->blocks()) {
                const Matrix pc = b.projector.conjugate();
                for (int r = 0; r < d; ++r)
                    for (int c = 0; c < d; ++c)
                        s.block(r * d, c * d, d, d) += pc(r, c) * b.projector;
            }
            break;
        }
        case Kind::coarse_grain_equipartition: {
            // Rank-(number of blocks): sum_a |vec P_a><vec P_a| / dim_a.
            for (std::size_t i = 0; i < partition_->size(); ++i) {
                const Vector v = vectorize(partition_->blocks()[i].projector);
                s += (v * v.adjoint()) / static_cast<double>(partition_->block_dim(i));
            }
            break;
        }
        case Kind::product_of_marginals:
            return;
    }
    superop_ = SuperOperator(space_, std::move(s), true);
}

// Free-function forms of the four maps.

inline DensityOperator dephase(const DensityOperator& rho, const Matrix& basis,
                               const NumericalPolicy& policy = default_policy()) {
    return ZwanzigProjection::dephasing(rho.space(), basis, policy).apply(rho, policy);
}

inline DensityOperator coarse_grain_equipartition(
    const DensityOperator& rho, const SubspacePartition& part,
    const NumericalPolicy& policy = default_policy()) {
    return ZwanzigProjection::equipartition(part).apply(rho, policy);
}

inline DensityOperator block_dephase(const DensityOperator& rho, const SubspacePartition& part,
                                     const NumericalPolicy& policy = default_policy()) {
    return ZwanzigProjection::block_dephasing(part).apply(rho, policy);
}

inline DensityOperator product_of_marginals(const DensityOperator& rho,
                                            const std::vector<std::string>& first_side,
                                            const NumericalPolicy& policy = default_policy()) {
    return ZwanzigProjection::marginal_product(rho.space(), first_side).apply(rho, policy);
}

inline SuperOperator as_superoperator(const ZwanzigProjection& p) { return p.superop(); }

// -sum lambda ln lambda with 0 ln 0 = 0; eigenvalues below the clip are
// treated as exact zeros.
inline double von_neumann_entropy(const Matrix& hermitian,
                                  const NumericalPolicy& policy = default_policy()) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (hermitian + hermitian.adjoint()),
                                             Eigen::EigenvaluesOnly);
    if (es.info() != Eigen::Success)
        throw NumericGuard("von_neumann_entropy: eigenvalue computation failed");
    double s = 0.0;
    for (int i = 0; i < es.eigenvalues().size(); ++i) {
        const double lam = es.eigenvalues()(i);
        if (lam > policy.entropy_eigenvalue_clip) s -= lam * std::log(lam);
    }
    return std::max(0.0, s);
}

inline double von_neumann_entropy(const DensityOperator& rho,
                                  const NumericalPolicy& policy = default_policy()) {
    return von_neumann_entropy(rho.matrix(), policy);
}

struct EntropyBreakdown {
    double total = 0.0;                    // entropy of the equipartition-projected state
    double relevant_info_term = 0.0;       // -sum_a w_a ln w_a
    double averaged_physical_term = 0.0;   // sum_a w_a ln(dim_a)
    RealVector weights;
    RealVector S_alpha;
};

// Weights w_a = tr(P_a rho) and the two-term decomposition of the projected
// state's entropy. `total` is computed from the eigenvalues of the projected
// state, independently of the closed-form terms, so the decomposition
// identity is a real check rather than a tautology.
inline EntropyBreakdown relevance_entropy(const DensityOperator& rho,
                                          const SubspacePartition& part,
                                          const NumericalPolicy& policy = default_policy()) {
    if (rho.space() != part.space())
        throw InvalidArgument("relevance_entropy: state and partition spaces differ");
    const std::size_t n = part.size();
    EntropyBreakdown out;
    out.weights.resize(static_cast<Eigen::Index>(n));
    out.S_alpha.resize(static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i) {
        double w = (part.blocks()[i].projector * rho.matrix()).trace().real();
        // States may carry eigenvalues down to the positivity floor, so block
        // weights can dip below zero by at most dim times that floor.
        if (w < 0.0 && w > policy.positivity_floor * rho.space().total_dim()) w = 0.0;
        if (w < 0.0)
            throw InvariantViolation("relevance_entropy: negative block weight");
        out.weights(static_cast<Eigen::Index>(i)) = w;
        out.S_alpha(static_cast<Eigen::Index>(i)) =
            std::log(static_cast<double>(part.block_dim(i)));
        if (w > policy.entropy_eigenvalue_clip) out.relevant_info_term -= w * std::log(w);
        out.averaged_physical_term += w * out.S_alpha(static_cast<Eigen::Index>(i));
    }
    out.total = von_neumann_entropy(coarse_grain_equipartition(rho, part, policy), policy);
    return out;
}

// Sum of marginal entropies over a grouping of the factors. Never below the
// global entropy (subadditivity), and zero exactly when every marginal is
// pure, i.e. for product states of pure factors.
inline double additive_local_entropy(const DensityOperator& rho,
                                     const std::vector<std::vector<std::string>>& groups,
                                     const NumericalPolicy& policy = default_policy()) {
    if (groups.empty()) throw InvalidArgument("additive_local_entropy: empty factorization");
    std::vector<std::string> all;
    for (const auto& g : groups) {
        if (g.empty()) throw InvalidArgument("additive_local_entropy: empty factor group");
        for (const auto& label : g) {
            for (const auto& seen : all)
                if (seen == label)
                    throw InvalidArgument("additive_local_entropy: factor '" + label +
                                          "' appears in more than one group");
            all.push_back(label);
        }
    }
    if (all.size() != rho.space().factors().size())
        throw InvalidArgument("additive_local_entropy: groups do not cover all factors");
    double s = 0.0;
    for (const auto& g : groups) s += von_neumann_entropy(partial_trace(rho, g, policy), policy);
    return s;
}

} // namespace zwanzig
