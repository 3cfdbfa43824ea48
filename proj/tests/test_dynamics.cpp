#include "helpers.hpp"

using namespace zwanzig;

TEST_CASE("time grids validate their parameters") {
    REQUIRE_THROWS_AS(TimeGrid(0.0, 0.0, 10), InvalidArgument);
    REQUIRE_THROWS_AS(TimeGrid(0.0, 0.1, 0), InvalidArgument);
    const TimeGrid grid(1.0, 0.25, 4);
    REQUIRE(grid.time(0) == 1.0);
    REQUIRE(grid.time(4) == Catch::Approx(2.0).margin(1e-15));
}

TEST_CASE("Hamiltonians must be Hermitian and sized to their space") {
    HilbertSpace q({Factor{"q", 2}});
    REQUIRE_THROWS_AS(Hamiltonian(q, Matrix::Identity(3, 3)), InvalidArgument);
    Matrix non_herm = Matrix::Zero(2, 2);
    non_herm(0, 1) = Complex(0.0, 1.0);
    REQUIRE_THROWS_AS(Hamiltonian(q, non_herm), InvariantViolation);
}

TEST_CASE("the Liouvillian is the commutator in vectorized form") {
    HilbertSpace space({Factor{"s", 4}});
    RandomStream rng(3);
    const Hamiltonian h(space, random_hermitian(4, rng));
    const SuperOperator l = liouvillian(h);
    REQUIRE_FALSE(l.hermiticity_preserving());
    // As a matrix L is Hermitian, hence has real spectrum.
    REQUIRE(is_hermitian(l.matrix(), 1e-12));
    for (int trial = 0; trial < 20; ++trial) {
        const Matrix x = random_hermitian(4, rng) + Complex(0, 1) * random_hermitian(4, rng);
        const Matrix comm = h.matrix() * x - x * h.matrix();
        REQUIRE(max_abs(l.apply(x) - comm) <= 1e-12);
    }
    // L annihilates anything commuting with H.
    REQUIRE(max_abs(l.apply(h.matrix())) <= 1e-12);
    REQUIRE(max_abs(l.apply(Matrix::Identity(4, 4))) <= 1e-12);
}

TEST_CASE("unitary propagation preserves trace, purity and spectrum") {
    HilbertSpace space({Factor{"s", 4}});
    RandomStream rng(5);
    const Hamiltonian h(space, random_hermitian(4, rng));
    const DensityOperator rho = random_density(space, rng);
    const DensityOperator evolved = propagate_unitary(rho, h, 0.8);
    REQUIRE(evolved.trace_deviation() <= 1e-12);
    REQUIRE(std::abs(evolved.purity() - rho.purity()) <= 1e-10);
    REQUIRE(std::abs(von_neumann_entropy(evolved) - von_neumann_entropy(rho)) <= 1e-9);
}

TEST_CASE("propagation composes additively in time") {
    HilbertSpace space({Factor{"s", 3}});
    RandomStream rng(7);
    const Hamiltonian h(space, random_hermitian(3, rng));
    const DensityOperator rho = random_density(space, rng);
    const DensityOperator two_steps = propagate_unitary(propagate_unitary(rho, h, 0.3), h, 0.5);
    const DensityOperator one_step = propagate_unitary(rho, h, 0.8);
    REQUIRE(trace_distance(two_steps, one_step) <= 1e-10);
}

TEST_CASE("pure-state propagation is consistent with density propagation") {
    HilbertSpace space({Factor{"s", 4}});
    RandomStream rng(11);
    const Hamiltonian h(space, random_hermitian(4, rng));
    const PureState psi = random_pure_state(space, rng);
    const PureState psi_t = propagate_unitary(psi, h, 1.3);
    const DensityOperator rho_t = propagate_unitary(DensityOperator::pure(psi), h, 1.3);
    REQUIRE(trace_distance(DensityOperator::pure(psi_t), rho_t) <= 1e-10);
}

TEST_CASE("the superoperator propagator matches conjugation by the unitary") {
    HilbertSpace space({Factor{"s", 3}});
    RandomStream rng(13);
    const Hamiltonian h(space, random_hermitian(3, rng));
    const SuperOperator u = propagator_superop(liouvillian(h), 0.6);
    REQUIRE(u.hermiticity_preserving());
    const DensityOperator rho = random_density(space, rng);
    const DensityOperator via_super = u.apply(rho);
    const DensityOperator via_eigen = propagate_unitary(rho, h, 0.6);
    REQUIRE(trace_distance(via_super, via_eigen) <= 1e-9);
}

TEST_CASE("random streams are reproducible and substreams decorrelated") {
    RandomStream a(99), b(99);
    for (int i = 0; i < 100; ++i) REQUIRE(a.next_raw() == b.next_raw());

    RandomStream parent(99);
    RandomStream child = parent.substream(0);
    RandomStream child2 = parent.substream(1);
    REQUIRE(child.next_raw() != child2.next_raw());

    RandomStream u(123);
    for (int i = 0; i < 1000; ++i) {
        const double x = u.uniform();
        REQUIRE(x >= 0.0);
        REQUIRE(x < 1.0);
    }
    RandomStream g(7);
    double mean = 0.0, var = 0.0;
    const int n = 4000;
    std::vector<double> xs;
    for (int i = 0; i < n; ++i) xs.push_back(g.gaussian());
    for (double x : xs) mean += x / n;
    for (double x : xs) var += (x - mean) * (x - mean) / (n - 1);
    REQUIRE(std::abs(mean) <= 0.1);
    REQUIRE(std::abs(var - 1.0) <= 0.15);

    RandomStream below_rng(17);
    for (int i = 0; i < 500; ++i) REQUIRE(below_rng.below(7) < 7);
}

TEST_CASE("random matrix factories satisfy their invariants") {
    RandomStream rng(21);
    for (int trial = 0; trial < 25; ++trial) {
        const Matrix u = random_unitary(4, rng);
        REQUIRE(max_abs(u.adjoint() * u - Matrix::Identity(4, 4)) <= 1e-12);
        const Matrix h = random_hermitian(4, rng, 0.5);
        REQUIRE(is_hermitian(h, 1e-14));
    }
    HilbertSpace space({Factor{"s", 5}});
    const DensityOperator rho = random_density(space, rng);
    REQUIRE(rho.trace_deviation() <= 1e-12);
    REQUIRE(rho.min_eigenvalue() >= -1e-12);

    const auto projectors = random_projector_partition(6, 3, rng);
    REQUIRE(projectors.size() == 3);
    Matrix sum = Matrix::Zero(6, 6);
    for (const auto& p : projectors) {
        REQUIRE(is_hermitian(p, 1e-12));
        REQUIRE(max_abs(p * p - p) <= 1e-10);
        sum += p;
    }
    REQUIRE(max_abs(sum - Matrix::Identity(6, 6)) <= 1e-10);
}

TEST_CASE("deterministic seeding yields identical random operators") {
    RandomStream r1(5), r2(5);
    REQUIRE(max_abs(random_hermitian(4, r1) - random_hermitian(4, r2)) == 0.0);
    HilbertSpace space({Factor{"s", 4}});
    RandomStream r3(5), r4(5);
    REQUIRE(max_abs(random_pure_state(space, r3).amplitudes() -
                    random_pure_state(space, r4).amplitudes()) == 0.0);
}
