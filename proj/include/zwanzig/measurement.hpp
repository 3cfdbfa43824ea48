#pragma once

#include <algorithm>
#include <cstdint>
#include <string>
#include <vector>

#include "zwanzig/dynamics.hpp"
#include "zwanzig/master.hpp"
#include "zwanzig/relevance.hpp"
#include "zwanzig/rng.hpp"

namespace zwanzig {

// Canonical biorthogonal form of a bipartite pure state: the input equals
// sum_l coefficients[l] * side1_states[l] (x) side2_states[l], coefficients
// non-negative and descending. Unique up to degeneracy; degeneracy_flag warns
// that the factor states are then convention-dependent.
struct SchmidtDecomposition {
    FactorBipartition split;
    RealVector coefficients;
    std::vector<PureState> side1_states;
    std::vector<PureState> side2_states;
    bool degeneracy_flag = false;
};

namespace detail {

// Lexicographic order on amplitude vectors, used only to pin an arbitrary but
// deterministic order inside degenerate coefficient groups.
inline bool lex_less(const Vector& a, const Vector& b) {
    for (Eigen::Index i = 0; i < a.size(); ++i) {
        if (a(i).real() != b(i).real()) return a(i).real() < b(i).real();
        if (a(i).imag() != b(i).imag()) return a(i).imag() < b(i).imag();
    }
    return false;
}

// Product amplitudes on the original (unregrouped) index order.
inline Vector assemble_product(const IndexSplit& split, const Vector& u, const Vector& w) {
    Vector out(static_cast<Eigen::Index>(split.selected_of.size()));
    for (Eigen::Index f = 0; f < out.size(); ++f)
        out(f) = u(split.selected_of[static_cast<std::size_t>(f)]) *
                 w(split.rest_of[static_cast<std::size_t>(f)]);
    return out;
}

} // namespace detail

inline SchmidtDecomposition schmidt(const PureState& psi,
                                    const std::vector<std::string>& first_side,
                                    const NumericalPolicy& policy = default_policy()) {
    SchmidtDecomposition out;
    out.split = bipartition_of(psi.space(), first_side);
    const IndexSplit split = split_indices(psi.space(), out.split.first);

    Matrix c(split.selected_dim, split.rest_dim);
    for (int f = 0; f < psi.space().total_dim(); ++f)
        c(split.selected_of[static_cast<std::size_t>(f)],
          split.rest_of[static_cast<std::size_t>(f)]) = psi.amplitudes()(f);

    Eigen::JacobiSVD<Matrix> svd(c, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const int full_rank = static_cast<int>(svd.singularValues().size());

    std::vector<double> sigma;
    std::vector<Vector> u_cols, w_cols;
    for (int l = 0; l < full_rank; ++l) {
        const double s = svd.singularValues()(l);
        if (s < policy.schmidt_rank_cutoff) break;  // descending; rest are smaller
        Vector u = svd.matrixU().col(l);
        Vector w = svd.matrixV().col(l).conjugate();
        // Phase convention: first non-negligible amplitude of the side-1
        // state real positive; the compensating phase moves to side 2.
        for (Eigen::Index i = 0; i < u.size(); ++i) {
            const double mag = std::abs(u(i));
            if (mag > policy.schmidt_rank_cutoff) {
                const Complex phase = u(i) / mag;
                u *= std::conj(phase);
                w *= phase;
                break;
            }
        }
        sigma.push_back(s);
        u_cols.push_back(std::move(u));
        w_cols.push_back(std::move(w));
    }
    if (sigma.empty()) throw InvariantViolation("schmidt: no coefficients above the cutoff");

    // Deterministic order inside near-degenerate runs.
    const std::size_t kept = sigma.size();
    for (std::size_t a = 0; a < kept;) {
        std::size_t b = a + 1;
        while (b < kept && sigma[b - 1] - sigma[b] < policy.schmidt_degeneracy_gap) ++b;
        if (b - a > 1) {
            out.degeneracy_flag = true;
            std::vector<std::size_t> idx(b - a);
            for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = a + i;
            std::sort(idx.begin(), idx.end(), [&](std::size_t x, std::size_t y) {
                return detail::lex_less(u_cols[x], u_cols[y]);
            });
            std::vector<double> s2;
            std::vector<Vector> u2, w2;
            for (std::size_t i : idx) {
                s2.push_back(sigma[i]);
                u2.push_back(u_cols[i]);
                w2.push_back(w_cols[i]);
            }
            for (std::size_t i = 0; i < idx.size(); ++i) {
                sigma[a + i] = s2[i];
                u_cols[a + i] = std::move(u2[i]);
                w_cols[a + i] = std::move(w2[i]);
            }
        }
        a = b;
    }

    double norm2 = 0.0;
    out.coefficients.resize(static_cast<Eigen::Index>(kept));
    const HilbertSpace s1 = psi.space().subspace(out.split.first);
    const HilbertSpace s2 = psi.space().subspace(out.split.second);
    Vector rebuilt = Vector::Zero(psi.amplitudes().size());
    for (std::size_t l = 0; l < kept; ++l) {
        out.coefficients(static_cast<Eigen::Index>(l)) = sigma[l];
        norm2 += sigma[l] * sigma[l];
        rebuilt += sigma[l] * detail::assemble_product(split, u_cols[l], w_cols[l]);
        out.side1_states.emplace_back(s1, std::move(u_cols[l]), policy);
        out.side2_states.emplace_back(s2, std::move(w_cols[l]), policy);
    }
    if (std::abs(norm2 - 1.0) > policy.unit_trace_tol)
        throw InvariantViolation("schmidt: coefficient squares do not sum to 1");
    if ((rebuilt - psi.amplitudes()).cwiseAbs().maxCoeff() > policy.reconstruction_tol)
        throw InvariantViolation("schmidt: reconstruction residual above tolerance");
    return out;
}

// One discrete outcome of a collapse: the surviving product component, its
// weight, and enough context (parent, bipartition, seed) to replay or to
// test later interference against sibling branches.
struct BranchRecord {
    int outcome = 0;
    double probability = 0.0;
    PureState state;   // product branch on the parent's full space
    PureState side1;
    PureState side2;
    FactorBipartition split;
    PureState parent;
    std::uint64_t seed = 0;  // 0 when the branch was enumerated, not sampled
};

namespace detail {

inline BranchRecord make_branch(const PureState& parent, const SchmidtDecomposition& dec,
                                int l, std::uint64_t seed,
                                const NumericalPolicy& policy = default_policy()) {
    const IndexSplit split = split_indices(parent.space(), dec.split.first);
    BranchRecord rec{
        l,
        dec.coefficients(l) * dec.coefficients(l),
        PureState(parent.space(),
                  assemble_product(split, dec.side1_states[static_cast<std::size_t>(l)].amplitudes(),
                                   dec.side2_states[static_cast<std::size_t>(l)].amplitudes()),
                  policy),
        dec.side1_states[static_cast<std::size_t>(l)],
        dec.side2_states[static_cast<std::size_t>(l)],
        dec.split,
        parent,
        seed};
    return rec;
}

} // namespace detail

// Draws outcome indices with the squared-coefficient weights. Shared by the
// single-shot sampler and bulk frequency tests.
inline std::vector<int> sample_outcomes(const SchmidtDecomposition& dec, RandomStream& rng,
                                        int count) {
    if (count < 0) throw InvalidArgument("sample_outcomes: negative count");
    const Eigen::Index k = dec.coefficients.size();
    std::vector<double> cdf(static_cast<std::size_t>(k));
    double acc = 0.0;
    for (Eigen::Index l = 0; l < k; ++l) {
        acc += dec.coefficients(l) * dec.coefficients(l);
        cdf[static_cast<std::size_t>(l)] = acc;
    }
    std::vector<int> out;
    out.reserve(static_cast<std::size_t>(count));
    for (int i = 0; i < count; ++i) {
        const double u = rng.uniform() * acc;
        const auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
        out.push_back(static_cast<int>(std::min<std::ptrdiff_t>(it - cdf.begin(), k - 1)));
    }
    return out;
}

inline BranchRecord collapse_sample(const PureState& psi,
                                    const std::vector<std::string>& first_side,
                                    RandomStream& rng,
                                    const NumericalPolicy& policy = default_policy()) {
    const SchmidtDecomposition dec = schmidt(psi, first_side, policy);
    const int l = sample_outcomes(dec, rng, 1).front();
    return detail::make_branch(psi, dec, l, rng.seed(), policy);
}

// Full outcome list plus the density operator that forgets which outcome
// occurred: the coefficient-weighted mixture of the product branches. The
// mixture equals dephasing of the parent projector in the biorthogonal bases.
struct BranchEnsemble {
    std::vector<BranchRecord> branches;
    DensityOperator mixture;
};

inline BranchEnsemble branch_ensemble(const PureState& psi,
                                      const std::vector<std::string>& first_side,
                                      const NumericalPolicy& policy = default_policy()) {
    const SchmidtDecomposition dec = schmidt(psi, first_side, policy);
    std::vector<BranchRecord> branches;
    const int d = psi.space().total_dim();
    Matrix mix = Matrix::Zero(d, d);
    for (Eigen::Index l = 0; l < dec.coefficients.size(); ++l) {
        branches.push_back(detail::make_branch(psi, dec, static_cast<int>(l), 0, policy));
        const Vector& v = branches.back().state.amplitudes();
        mix += branches.back().probability * (v * v.adjoint());
    }
    return BranchEnsemble{std::move(branches),
                          DensityOperator(psi.space(), std::move(mix), policy)};
}

// Two-level branch hierarchy: first split off region one, then split each
// relative state of the remainder across the other two regions. Leaf path
// probabilities multiply down the tree and sum to 1.
struct BranchTreeNode {
    BranchRecord record;
    int parent_index = -1;  // -1 for first-level nodes
    double path_probability = 0.0;
};

struct BranchTree {
    std::vector<BranchTreeNode> nodes;
};

inline BranchTree nested_schmidt(const PureState& psi, const std::vector<std::string>& region1,
                                 const std::vector<std::string>& region21,
                                 const std::vector<std::string>& region22,
                                 const NumericalPolicy& policy = default_policy()) {
    std::vector<std::string> all;
    for (const auto* group : {&region1, &region21, &region22}) {
        if (group->empty()) throw InvalidArgument("nested_schmidt: empty region");
        for (const auto& label : *group) {
            if (std::find(all.begin(), all.end(), label) != all.end())
                throw InvalidArgument("nested_schmidt: regions overlap at '" + label + "'");
            all.push_back(label);
        }
    }
    if (all.size() != psi.space().factors().size())
        throw InvalidArgument("nested_schmidt: regions do not cover the space");

    BranchTree tree;
    const SchmidtDecomposition top = schmidt(psi, region1, policy);
    const IndexSplit split1 = split_indices(psi.space(), top.split.first);
    for (Eigen::Index l = 0; l < top.coefficients.size(); ++l) {
        BranchTreeNode node{detail::make_branch(psi, top, static_cast<int>(l), 0, policy), -1,
                            0.0};
        node.path_probability = node.record.probability;
        tree.nodes.push_back(std::move(node));
        const int parent_index = static_cast<int>(tree.nodes.size()) - 1;
        const double parent_path = tree.nodes.back().path_probability;

        // Relative state of the remainder, decomposed across the two
        // sub-regions; leaves carry full-space product states. Copies, not
        // references: the node vector reallocates while leaves are appended.
        const PureState gamma = tree.nodes.back().record.side2;
        const Vector phi = tree.nodes.back().record.side1.amplitudes();
        const SchmidtDecomposition sub = schmidt(gamma, region21, policy);
        for (Eigen::Index m = 0; m < sub.coefficients.size(); ++m) {
            BranchRecord leaf = detail::make_branch(gamma, sub, static_cast<int>(m), 0, policy);
            const Vector embedded =
                detail::assemble_product(split1, phi, leaf.state.amplitudes());
            leaf.state = PureState(psi.space(), embedded, policy);
            tree.nodes.push_back(
                BranchTreeNode{std::move(leaf), parent_index,
                               parent_path * sub.coefficients(m) * sub.coefficients(m)});
        }
    }
    return tree;
}

// Interference amplitude between two branches of the same collapse after both
// evolve jointly for time t. The raw full-space overlap <a(t)|b(t)> is
// conserved under joint unitary evolution (it stays exactly 0), so the
// reported amplitude is the first-side channel coherence
//   <phi_a| tr_2( |a(t)><b(t)| ) |phi_b>,
// where phi_a, phi_b are the branches' original first-side states. It is 0 at
// t = 0, remains 0 for all t when the two sides do not interact, and its
// revival magnitude measures how distinguishable collapse is from unobserved
// branching for the given system size.
inline Complex interference_overlap(const BranchRecord& a, const BranchRecord& b,
                                    const Hamiltonian& h, double t) {
    if (a.parent.space() != b.parent.space() ||
        max_abs(a.parent.amplitudes() - b.parent.amplitudes()) > 1e-10 ||
        a.split.first != b.split.first)
        throw InvalidArgument("interference_overlap: branches have different parents");
    if (h.space() != a.state.space())
        throw InvalidArgument("interference_overlap: Hamiltonian space mismatch");
    detail::UnitaryCache cache(h);
    const Matrix u = cache.at(t);
    const Vector va = u * a.state.amplitudes();
    const Vector vb = u * b.state.amplitudes();
    const Matrix cross = va * vb.adjoint();
    const Matrix channel = partial_trace_matrix(h.space(), cross, a.split.first);
    return (a.side1.amplitudes().adjoint() * channel * b.side1.amplitudes()).value();
}

inline std::vector<Complex> interference_overlap_series(const BranchRecord& a,
                                                        const BranchRecord& b,
                                                        const Hamiltonian& h,
                                                        const TimeGrid& grid) {
    if (a.parent.space() != b.parent.space() ||
        max_abs(a.parent.amplitudes() - b.parent.amplitudes()) > 1e-10 ||
        a.split.first != b.split.first)
        throw InvalidArgument("interference_overlap: branches have different parents");
    if (h.space() != a.state.space())
        throw InvalidArgument("interference_overlap: Hamiltonian space mismatch");
    detail::UnitaryCache cache(h);
    std::vector<Complex> out;
    out.reserve(static_cast<std::size_t>(grid.steps) + 1);
    for (int n = 0; n <= grid.steps; ++n) {
        const Matrix u = cache.at(grid.time(n));
        const Vector va = u * a.state.amplitudes();
        const Vector vb = u * b.state.amplitudes();
        const Matrix cross = va * vb.adjoint();
        const Matrix channel = partial_trace_matrix(h.space(), cross, a.split.first);
        out.push_back((a.side1.amplitudes().adjoint() * channel * b.side1.amplitudes()).value());
    }
    return out;
}

// Unitary premeasurement: couples the system to a fresh pointer factor so
// that basis outcome i ends up correlated with pointer state |i>. The reduced
// system state afterwards equals the dephased input in the measurement basis.
inline PureState premeasure(const PureState& system, int pointer_dim, const Matrix& basis,
                            const NumericalPolicy& policy = default_policy()) {
    const int ds = system.space().total_dim();
    if (pointer_dim < ds)
        throw InvalidArgument("premeasure: pointer dimension is smaller than the outcome count");
    if (basis.rows() != ds || basis.cols() != ds)
        throw DimensionError("premeasure: basis size does not match the system");
    if (max_abs(basis.adjoint() * basis - Matrix::Identity(ds, ds)) >
        policy.orthonormality_tol)
        throw InvalidArgument("premeasure: basis columns are not orthonormal");
    if (system.space().has_factor("pointer"))
        throw InvalidArgument("premeasure: the system already has a factor named 'pointer'");

    std::vector<Factor> factors = system.space().factors();
    factors.push_back(Factor{"pointer", pointer_dim});
    HilbertSpace composite(std::move(factors), policy);

    Vector out = Vector::Zero(static_cast<Eigen::Index>(ds) * pointer_dim);
    for (int i = 0; i < ds; ++i) {
        const Complex ci = (basis.col(i).adjoint() * system.amplitudes()).value();
        for (int s = 0; s < ds; ++s) out(static_cast<Eigen::Index>(s) * pointer_dim + i) += ci * basis(s, i);
    }
    return PureState(std::move(composite), std::move(out), policy);
}

} // namespace zwanzig
