#include "helpers.hpp"

using namespace zwanzig;

namespace {

// Rebuild the full state from a Schmidt decomposition, in the original
// factor order.
Vector rebuild(const HilbertSpace& parent_space, const SchmidtDecomposition& dec) {
    Vector out;
    const IndexSplit split = split_indices(parent_space, dec.split.first);
    for (Eigen::Index l = 0; l < dec.coefficients.size(); ++l) {
        const Vector term = detail::assemble_product(
            split, dec.side1_states[static_cast<std::size_t>(l)].amplitudes(),
            dec.side2_states[static_cast<std::size_t>(l)].amplitudes());
        if (l == 0)
            out = dec.coefficients(l) * term;
        else
            out += dec.coefficients(l) * term;
    }
    return out;
}

} // namespace

TEST_CASE("a product state has Schmidt rank one") {
    HilbertSpace space = zt::qubits({"a", "b"});
    Vector v = Vector::Zero(4);
    v(0) = 0.6;
    v(1) = 0.8;  // |0>_a (0.6|0> + 0.8|1>)_b
    const PureState psi(space, v);
    const SchmidtDecomposition dec = schmidt(psi, {"a"});
    REQUIRE(dec.coefficients.size() == 1);
    REQUIRE(dec.coefficients(0) == Catch::Approx(1.0).margin(1e-12));
    REQUIRE_FALSE(dec.degeneracy_flag);
    REQUIRE(max_abs(rebuild(space, dec) - v) <= 1e-12);
}

TEST_CASE("the Bell pair has two equal coefficients and entropy ln 2") {
    const SchmidtDecomposition dec = schmidt(zt::bell_pair(), {"a"});
    REQUIRE(dec.coefficients.size() == 2);
    const double inv_sqrt2 = 1.0 / std::sqrt(2.0);
    REQUIRE(std::abs(dec.coefficients(0) - inv_sqrt2) <= 1e-12);
    REQUIRE(std::abs(dec.coefficients(1) - inv_sqrt2) <= 1e-12);
    REQUIRE(dec.degeneracy_flag);  // exactly degenerate pair

    double entropy = 0.0;
    for (Eigen::Index l = 0; l < 2; ++l) {
        const double p = dec.coefficients(l) * dec.coefficients(l);
        entropy -= p * std::log(p);
    }
    REQUIRE(entropy == Catch::Approx(std::log(2.0)).margin(1e-12));
}

TEST_CASE("Schmidt factors are orthonormal and reconstruct the state") {
    HilbertSpace space({Factor{"a", 2}, Factor{"b", 3}});
    RandomStream rng(3);
    for (int trial = 0; trial < 100; ++trial) {
        const PureState psi = random_pure_state(space, rng);
        const SchmidtDecomposition dec = schmidt(psi, {"a"});
        const Eigen::Index r = dec.coefficients.size();
        REQUIRE(r <= 2);

        double sum_sq = 0.0;
        for (Eigen::Index l = 0; l < r; ++l) {
            REQUIRE(dec.coefficients(l) > 0.0);
            if (l > 0) REQUIRE(dec.coefficients(l) <= dec.coefficients(l - 1) + 1e-15);
            sum_sq += dec.coefficients(l) * dec.coefficients(l);
        }
        REQUIRE(std::abs(sum_sq - 1.0) <= 1e-12);

        for (Eigen::Index k = 0; k < r; ++k)
            for (Eigen::Index l = 0; l < r; ++l) {
                const Complex g1 =
                    dec.side1_states[static_cast<std::size_t>(k)].amplitudes().dot(
                        dec.side1_states[static_cast<std::size_t>(l)].amplitudes());
                const Complex g2 =
                    dec.side2_states[static_cast<std::size_t>(k)].amplitudes().dot(
                        dec.side2_states[static_cast<std::size_t>(l)].amplitudes());
                const double expected = k == l ? 1.0 : 0.0;
                REQUIRE(std::abs(g1 - Complex(expected, 0)) <= 1e-10);
                REQUIRE(std::abs(g2 - Complex(expected, 0)) <= 1e-10);
            }

        REQUIRE(max_abs(rebuild(space, dec) - psi.amplitudes()) <= 1e-10);
    }
}

TEST_CASE("Schmidt coefficient squares equal the marginal spectrum") {
    HilbertSpace space({Factor{"a", 3}, Factor{"b", 4}});
    RandomStream rng(5);
    for (int trial = 0; trial < 50; ++trial) {
        const PureState psi = random_pure_state(space, rng);
        const SchmidtDecomposition dec = schmidt(psi, {"a"});
        const DensityOperator marginal = partial_trace(DensityOperator::pure(psi), {"a"});
        const SpectralDecomposition spec = spectral(marginal.matrix());
        for (Eigen::Index l = 0; l < dec.coefficients.size(); ++l)
            REQUIRE(std::abs(dec.coefficients(l) * dec.coefficients(l) -
                             spec.eigenvalues(l)) <= 1e-10);
    }
}

TEST_CASE("the first-side phase convention pins the decomposition") {
    HilbertSpace space = zt::qubits({"a", "b"});
    RandomStream rng(7);
    for (int trial = 0; trial < 50; ++trial) {
        const PureState psi = random_pure_state(space, rng);
        const SchmidtDecomposition dec = schmidt(psi, {"a"});
        for (const auto& state : dec.side1_states) {
            const Vector& u = state.amplitudes();
            Eigen::Index first = 0;
            while (first < u.size() && std::abs(u(first)) <= 1e-12) ++first;
            REQUIRE(first < u.size());
            REQUIRE(u(first).imag() == Catch::Approx(0.0).margin(1e-12));
            REQUIRE(u(first).real() > 0.0);
        }
    }
}

TEST_CASE("Schmidt coefficients are stable under tiny perturbations") {
    HilbertSpace space({Factor{"a", 2}, Factor{"b", 3}});
    RandomStream rng(11);
    const PureState psi = random_pure_state(space, rng);
    const SchmidtDecomposition base = schmidt(psi, {"a"});

    Vector noise(6);
    for (int i = 0; i < 6; ++i) noise(i) = Complex(rng.gaussian(), rng.gaussian());
    Vector v = psi.amplitudes() + 1e-8 * noise;
    v /= v.norm();
    const SchmidtDecomposition perturbed = schmidt(PureState(space, v), {"a"});
    REQUIRE(perturbed.coefficients.size() == base.coefficients.size());
    for (Eigen::Index l = 0; l < base.coefficients.size(); ++l)
        REQUIRE(std::abs(perturbed.coefficients(l) - base.coefficients(l)) <= 1e-6);
}

TEST_CASE("branch ensembles carry Born weights and rebuild the dephased mixture") {
    HilbertSpace space = zt::qubits({"a", "b"});
    Vector v = Vector::Zero(4);
    v(0) = std::sqrt(0.3);
    v(3) = std::sqrt(0.7);
    const PureState psi(space, v);
    const BranchEnsemble ensemble = branch_ensemble(psi, {"a"});
    REQUIRE(ensemble.branches.size() == 2);
    // Coefficients sort descending, so the 0.7 branch comes first.
    REQUIRE(ensemble.branches[0].probability == Catch::Approx(0.7).margin(1e-12));
    REQUIRE(ensemble.branches[1].probability == Catch::Approx(0.3).margin(1e-12));
    REQUIRE(ensemble.branches[0].outcome == 0);
    REQUIRE(ensemble.branches[0].seed == 0);  // enumerated, not sampled

    Matrix expected = Matrix::Zero(4, 4);
    expected(0, 0) = 0.3;
    expected(3, 3) = 0.7;
    REQUIRE(max_abs(ensemble.mixture.matrix() - expected) <= 1e-12);

    // Branch states are unit product vectors.
    for (const auto& b : ensemble.branches) {
        const SchmidtDecomposition bd = schmidt(b.state, {"a"});
        REQUIRE(bd.coefficients.size() == 1);
    }
}

TEST_CASE("sampled outcomes follow the Born profile") {
    HilbertSpace space = zt::qubits({"a", "b"});
    Vector v = Vector::Zero(4);
    v(0) = std::sqrt(0.2);
    v(3) = std::sqrt(0.8);
    const PureState psi(space, v);
    const SchmidtDecomposition dec = schmidt(psi, {"a"});

    RandomStream rng(42);
    const int n = 20000;
    const std::vector<int> outcomes = sample_outcomes(dec, rng, n);
    REQUIRE(outcomes.size() == static_cast<std::size_t>(n));
    int first = 0;
    for (int o : outcomes) {
        REQUIRE(o >= 0);
        REQUIRE(o < 2);
        if (o == 0) ++first;
    }
    const double f = static_cast<double>(first) / n;
    const double band = 3.0 * std::sqrt(0.8 * 0.2 / n);
    REQUIRE(std::abs(f - 0.8) <= band);
}

TEST_CASE("collapse sampling records its seed and returns a valid branch") {
    HilbertSpace space = zt::qubits({"a", "b"});
    RandomStream rng(1234);
    const PureState psi = zt::bell_pair("a", "b");
    const BranchRecord branch = collapse_sample(psi, {"a"}, rng);
    REQUIRE(branch.seed == 1234);
    REQUIRE((branch.outcome == 0 || branch.outcome == 1));
    REQUIRE(branch.probability == Catch::Approx(0.5).margin(1e-12));
    REQUIRE(std::abs(branch.state.amplitudes().norm() - 1.0) <= 1e-12);

    RandomStream rng2(1234);
    const BranchRecord again = collapse_sample(psi, {"a"}, rng2);
    REQUIRE(again.outcome == branch.outcome);
}

TEST_CASE("nested decomposition multiplies path probabilities down the tree") {
    const PureState psi = zt::ghz();
    const BranchTree tree = nested_schmidt(psi, {"a"}, {"b"}, {"c"});
    // Two top-level branches, each with a single product leaf.
    REQUIRE(tree.nodes.size() == 4);
    int tops = 0, leaves = 0;
    double leaf_prob = 0.0;
    for (const auto& node : tree.nodes) {
        if (node.parent_index < 0) {
            ++tops;
            REQUIRE(node.record.probability == Catch::Approx(0.5).margin(1e-12));
        } else {
            ++leaves;
            leaf_prob += node.path_probability;
            // Leaves of a GHZ state are full product basis states.
            const Vector& amp = node.record.state.amplitudes();
            double largest = 0.0;
            for (Eigen::Index i = 0; i < amp.size(); ++i)
                largest = std::max(largest, std::abs(amp(i)));
            REQUIRE(largest == Catch::Approx(1.0).margin(1e-10));
        }
    }
    REQUIRE(tops == 2);
    REQUIRE(leaves == 2);
    REQUIRE(leaf_prob == Catch::Approx(1.0).margin(1e-10));

    REQUIRE_THROWS_AS(nested_schmidt(psi, {"a"}, {"b"}, {"b"}), InvalidArgument);
    REQUIRE_THROWS_AS(nested_schmidt(psi, {"a"}, {"b"}, {}), InvalidArgument);
}

TEST_CASE("fresh branches have zero interference that revives under coupling") {
    HilbertSpace space = zt::qubits({"left", "right"});
    RandomStream rng(21);
    const Matrix h1 = random_hermitian(2, rng, 1.0);
    const Matrix h2 = random_hermitian(2, rng, 1.0);
    const Matrix v = random_hermitian(4, rng, 0.6);
    const Matrix coupled = embed_factor(space, "left", h1) +
                           embed_factor(space, "right", h2) + v;
    const Hamiltonian h(space, coupled);

    const BranchEnsemble ensemble = branch_ensemble(zt::bell_pair("left", "right"), {"left"});
    REQUIRE(ensemble.branches.size() == 2);
    const BranchRecord& a = ensemble.branches[0];
    const BranchRecord& b = ensemble.branches[1];

    REQUIRE(std::abs(interference_overlap(a, b, h, 0.0)) <= 1e-12);

    const std::vector<Complex> series =
        interference_overlap_series(a, b, h, TimeGrid(0.0, 0.05, 200));
    double peak = 0.0;
    for (const Complex& z : series) peak = std::max(peak, std::abs(z));
    REQUIRE(peak > 0.01);

    // Without coupling the branch channels stay orthogonal forever.
    const Hamiltonian free(space, embed_factor(space, "left", h1) +
                                      embed_factor(space, "right", h2));
    const std::vector<Complex> flat =
        interference_overlap_series(a, b, free, TimeGrid(0.0, 0.05, 100));
    for (const Complex& z : flat) REQUIRE(std::abs(z) <= 1e-10);
}

TEST_CASE("premeasurement copies the system basis onto the pointer") {
    HilbertSpace sys({Factor{"sys", 2}});
    Vector v(2);
    v << Complex(0.6, 0.0), Complex(0.8, 0.0);
    const PureState psi(sys, v);
    const PureState correlated = premeasure(psi, 2, Matrix::Identity(2, 2));
    REQUIRE(correlated.space().factor_count() == 2);
    REQUIRE(correlated.space().has_factor("pointer"));
    // alpha |0>|p0> + beta |1>|p1> in flat order (sys, pointer).
    REQUIRE(std::abs(correlated.amplitudes()(0) - Complex(0.6, 0)) <= 1e-12);
    REQUIRE(std::abs(correlated.amplitudes()(3) - Complex(0.8, 0)) <= 1e-12);
    REQUIRE(std::abs(correlated.amplitudes()(1)) <= 1e-15);
    REQUIRE(std::abs(correlated.amplitudes()(2)) <= 1e-15);

    // The pointer must have at least as many states as the system.
    REQUIRE_THROWS_AS(premeasure(psi, 1, Matrix::Identity(2, 2)), InvalidArgument);
    Matrix skew = Matrix::Identity(2, 2);
    skew(0, 0) = 2.0;
    REQUIRE_THROWS_AS(premeasure(psi, 2, skew), InvalidArgument);
}

TEST_CASE("branching lowers additive local entropy to zero") {
    HilbertSpace space({Factor{"a", 2}, Factor{"b", 3}});
    RandomStream rng(31);
    int checked = 0;
    for (int trial = 0; trial < 40; ++trial) {
        const PureState psi = random_pure_state(space, rng);
        const DensityOperator parent = DensityOperator::pure(psi);
        const double parent_local = additive_local_entropy(parent, {{"a"}, {"b"}});
        if (parent_local < 1e-3) continue;  // essentially product already
        ++checked;
        const BranchRecord branch = collapse_sample(psi, {"a"}, rng);
        const double branch_local =
            additive_local_entropy(DensityOperator::pure(branch.state), {{"a"}, {"b"}});
        REQUIRE(branch_local <= 1e-8);
        REQUIRE(parent_local > branch_local);
    }
    REQUIRE(checked >= 30);  // random states are almost surely entangled
}
