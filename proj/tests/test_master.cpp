#include "helpers.hpp"

using namespace zwanzig;

namespace {

// Qubit system coupled to a small bath through a sigma_z interaction, the
// workhorse geometry for solver comparisons.
struct DephasingModel {
    HilbertSpace space;
    Hamiltonian h;
    ZwanzigProjection proj;
    DensityOperator rho0;
};

DephasingModel make_model(std::uint64_t seed, double scale) {
    HilbertSpace space({Factor{"sys", 2}, Factor{"b1", 2}});
    RandomStream rng(seed);
    Hamiltonian h(space, random_hermitian(4, rng, scale));
    ZwanzigProjection proj =
        ZwanzigProjection::dephasing(space, Matrix::Identity(4, 4));
    DensityOperator rho0 = DensityOperator::pure(PureState::basis_state(space, 0));
    return {space, h, proj, rho0};
}

double max_endpoint_distance(const Trajectory& a, const Trajectory& b) {
    double worst = 0.0;
    for (std::size_t i = 0; i < a.states.size(); ++i)
        worst = std::max(worst, trace_distance(a.states[i], b.states[i]));
    return worst;
}

} // namespace

TEST_CASE("the projected reference trajectory records states and diagnostics") {
    auto model = make_model(3, 0.5);
    const TimeGrid grid(0.0, 0.1, 20);
    const Trajectory traj = exact_projected_reference(model.rho0, model.h, model.proj, grid);
    REQUIRE(traj.states.size() == 21);
    REQUIRE(traj.diagnostics.size() == 21);
    for (const auto& d : traj.diagnostics) {
        REQUIRE(d.trace_dev <= 1e-8);
        REQUIRE(d.positivity_margin >= -1e-6);
    }
    // Step 0 is the projection of the initial state itself.
    REQUIRE(trace_distance(traj.states[0], model.proj.apply(model.rho0)) <= 1e-12);
    // One hand-computed step.
    const DensityOperator evolved = propagate_unitary(model.rho0, model.h, 0.1);
    REQUIRE(trace_distance(traj.states[1], model.proj.apply(evolved)) <= 1e-12);
}

TEST_CASE("memory kernel tabulation starts from PL(1-P)L") {
    auto model = make_model(5, 0.7);
    const MemoryKernel kernel =
        build_memory_kernel(model.h, model.proj, TimeGrid(0.0, 0.05, 4));
    REQUIRE(kernel.taus.size() == 5);
    REQUIRE(kernel.kernels.size() == 5);
    REQUIRE(kernel.inhomogeneities.size() == 5);

    const Matrix lm = liouvillian(model.h).matrix();
    const Matrix pm = model.proj.superop().matrix();
    const Matrix pl = pm * lm;
    const Matrix ql = lm - pl;
    REQUIRE(max_abs(kernel.kernels[0].matrix() - pl * ql) <= 1e-12);
    REQUIRE(max_abs(kernel.inhomogeneities[0].matrix() - pl) <= 1e-12);

    REQUIRE_THROWS_AS(
        build_memory_kernel(model.h, model.proj, TimeGrid(0.5, 0.05, 4)),
        InvalidArgument);
    const ZwanzigProjection nonlinear =
        ZwanzigProjection::marginal_product(model.space, {"sys"});
    REQUIRE_THROWS_AS(build_memory_kernel(model.h, nonlinear, TimeGrid(0.0, 0.05, 4)),
                      LinearityError);
}

TEST_CASE("memory kernel growth matches its generator to first order") {
    auto model = make_model(7, 0.5);
    const double tau = 1e-3;
    const MemoryKernel kernel =
        build_memory_kernel(model.h, model.proj, TimeGrid(0.0, tau, 1));
    const Matrix lm = liouvillian(model.h).matrix();
    const Matrix pm = model.proj.superop().matrix();
    const Matrix pl = pm * lm;
    const Matrix ql = lm - pl;
    // K(tau) = K(0) + tau PL(-i QL)QL + O(tau^2)
    const Matrix first_order = pl * ql + tau * (pl * (Complex(0, -1) * ql) * ql);
    REQUIRE(max_abs(kernel.kernels[1].matrix() - first_order) <= 1e-5);
}

TEST_CASE("premaster is static when nothing couples the relevant part") {
    // Diagonal H commutes with every diagonal state: the kernel equation's
    // right side vanishes identically and the solution must not move.
    HilbertSpace space({Factor{"s", 4}});
    Matrix hm = Matrix::Zero(4, 4);
    hm.diagonal() << 0.3, -0.2, 1.1, 0.6;
    const Hamiltonian h(space, hm);
    const ZwanzigProjection p = ZwanzigProjection::dephasing(space, Matrix::Identity(4, 4));
    Matrix m0 = Matrix::Zero(4, 4);
    m0.diagonal() << 0.4, 0.3, 0.2, 0.1;
    const DensityOperator rho0(space, m0);
    const Trajectory traj = premaster_evolve(rho0, h, p, TimeGrid(0.0, 0.05, 40));
    for (const auto& s : traj.states) REQUIRE(max_abs(s.matrix() - m0) <= 1e-12);
}

TEST_CASE("premaster matches the exact projected reference") {
    auto model = make_model(11, 0.5);
    const TimeGrid grid(0.0, 1e-3, 1000);
    const Trajectory exact = exact_projected_reference(model.rho0, model.h, model.proj, grid);
    const Trajectory solved = premaster_evolve(model.rho0, model.h, model.proj, grid);
    REQUIRE(max_endpoint_distance(exact, solved) <= 1e-6);
}

TEST_CASE("halving the step shrinks the error like a second-order method") {
    auto model = make_model(13, 0.8);
    const double T = 1.0;
    auto endpoint_error = [&](double dt) {
        const int steps = static_cast<int>(std::round(T / dt));
        const TimeGrid grid(0.0, dt, steps);
        const Trajectory exact =
            exact_projected_reference(model.rho0, model.h, model.proj, grid);
        const Trajectory solved = premaster_evolve(model.rho0, model.h, model.proj, grid);
        return trace_distance(exact.states.back(), solved.states.back());
    };
    const double e1 = endpoint_error(0.02);
    const double e2 = endpoint_error(0.01);
    const double e3 = endpoint_error(0.005);
    REQUIRE(e1 / e2 >= 2.0);
    REQUIRE(e2 / e3 >= 2.0);
}

TEST_CASE("an irrelevant initial component feeds in through the inhomogeneity") {
    // Start from a pure superposition: its off-diagonal part is the
    // irrelevant component. The solver fed (P rho0, Q rho0) must track the
    // projection of the exact flow of the full rho0.
    HilbertSpace space({Factor{"sys", 2}, Factor{"b1", 2}});
    RandomStream rng(17);
    const Hamiltonian h(space, random_hermitian(4, rng, 0.4));
    const ZwanzigProjection p = ZwanzigProjection::dephasing(space, Matrix::Identity(4, 4));
    const PureState psi = random_pure_state(space, rng);
    const Matrix full = psi.amplitudes() * psi.amplitudes().adjoint();
    const Matrix relevant = p.apply(full);
    const Matrix irrelevant = full - relevant;

    const DensityOperator rho_rel(space, relevant);
    const TimeGrid grid(0.0, 1e-3, 500);
    const Trajectory solved = premaster_evolve(rho_rel, irrelevant, h, p, grid);
    const Trajectory exact =
        exact_projected_reference(DensityOperator(space, full), h, p, grid);
    REQUIRE(max_endpoint_distance(exact, solved) <= 1e-5);
}

TEST_CASE("premaster validates its inputs") {
    auto model = make_model(19, 0.5);
    const TimeGrid grid(0.0, 0.01, 10);

    // Not relevant: a superposition has off-diagonal entries.
    Vector v = Vector::Zero(4);
    v(0) = v(3) = 1.0 / std::sqrt(2.0);
    const DensityOperator coherent =
        DensityOperator::pure(PureState(model.space, v));
    REQUIRE_THROWS_AS(premaster_evolve(coherent, model.h, model.proj, grid),
                      InvalidArgument);

    const ZwanzigProjection nonlinear =
        ZwanzigProjection::marginal_product(model.space, {"sys"});
    REQUIRE_THROWS_AS(premaster_evolve(model.rho0, model.h, nonlinear, grid),
                      LinearityError);

    // rho_irr0 must be irrelevant and traceless.
    REQUIRE_THROWS_AS(premaster_evolve(model.rho0, 0.1 * Matrix::Identity(4, 4), model.h,
                                       model.proj, grid),
                      InvalidArgument);
    Matrix off = Matrix::Zero(4, 4);
    off(0, 1) = off(1, 0) = 0.1;
    REQUIRE_NOTHROW(premaster_evolve(model.rho0, off, model.h, model.proj, grid));
    REQUIRE_THROWS_AS(premaster_evolve(model.rho0, Matrix::Zero(3, 3), model.h, model.proj,
                                       grid),
                      DimensionError);
}

TEST_CASE("the trace-drift guard rejects absurd step sizes") {
    auto model = make_model(23, 3.0);
    bool guarded = false;
    try {
        premaster_evolve(model.rho0, model.h, model.proj, TimeGrid(0.0, 5.0, 40));
    } catch (const NumericGuard& e) {
        guarded = true;
        REQUIRE(std::string(e.what()).find("step size too coarse") != std::string::npos);
    }
    REQUIRE(guarded);
}

TEST_CASE("the Markov generator lives entirely on the relevant subspace") {
    auto model = make_model(29, 0.6);
    const SuperOperator g = markov_generator(model.h, model.proj, 1e-3);
    const Matrix pm = model.proj.superop().matrix();
    const Matrix qg =
        (Matrix::Identity(pm.rows(), pm.cols()) - pm) * g.matrix();
    REQUIRE(max_abs(qg) <= 1e-10);

    // Trace preservation: tr(G X) = 0, i.e. vec(1)^dagger G = 0.
    const Vector tr_vec = vectorize(Matrix::Identity(4, 4));
    REQUIRE((tr_vec.adjoint() * g.matrix()).cwiseAbs().maxCoeff() <= 1e-10);

    REQUIRE_THROWS_AS(markov_generator(model.h, model.proj, 0.0), InvalidArgument);
    const ZwanzigProjection nonlinear =
        ZwanzigProjection::marginal_product(model.space, {"sys"});
    REQUIRE_THROWS_AS(markov_generator(model.h, nonlinear, 1e-3), LinearityError);
}

TEST_CASE("the generator dissipates on the relevant subspace and dies off at large regularizer") {
    auto model = make_model(31, 0.5);
    const Matrix pm = model.proj.superop().matrix();
    for (double eps : {1e-2, 1e-3, 1e-4}) {
        // Restricted to relevant inputs the Hermitian part is non-positive, so
        // the propagated flow contracts in the Hilbert-Schmidt norm and cannot
        // blow up no matter how spiky the regularized rates are.
        const Matrix g = markov_generator(model.h, model.proj, eps).matrix();
        const Matrix herm = pm * (0.5 * (g + g.adjoint())) * pm;
        Eigen::SelfAdjointEigenSolver<Matrix> es(herm);
        REQUIRE(es.eigenvalues().maxCoeff() <= 1e-10);
    }
    // The resolvent scales as 1/eps for large eps, so the generator vanishes.
    REQUIRE(max_abs(markov_generator(model.h, model.proj, 1e9).matrix()) <= 1e-6);
}

TEST_CASE("a diagonal Hamiltonian freezes the Markov dynamics") {
    HilbertSpace space({Factor{"s", 4}});
    Matrix hm = Matrix::Zero(4, 4);
    hm.diagonal() << 0.4, -0.1, 0.9, 0.2;
    const Hamiltonian h(space, hm);
    const ZwanzigProjection p = ZwanzigProjection::dephasing(space, Matrix::Identity(4, 4));
    const SuperOperator g = markov_generator(h, p, 1e-3);
    Matrix m0 = Matrix::Zero(4, 4);
    m0.diagonal() << 0.4, 0.3, 0.2, 0.1;
    REQUIRE(max_abs(g.apply(m0)) <= 1e-12);
    const Trajectory traj =
        markov_evolve(DensityOperator(space, m0), h, p, 1e-3, TimeGrid(0.0, 0.1, 20));
    for (const auto& s : traj.states) REQUIRE(max_abs(s.matrix() - m0) <= 1e-10);
}

TEST_CASE("markov trajectories stay relevant and conserve trace") {
    auto model = make_model(37, 0.4);
    const Trajectory traj =
        markov_evolve(model.rho0, model.h, model.proj, 1e-3, TimeGrid(0.0, 0.05, 100));
    REQUIRE(traj.states.size() == 101);
    for (const auto& s : traj.states) {
        REQUIRE(s.trace_deviation() <= 1e-8);
        REQUIRE(max_abs(model.proj.apply(s.matrix()) - s.matrix()) <= 1e-8);
    }
}

TEST_CASE("markov starts from the projected initial state") {
    auto model = make_model(41, 0.4);
    Vector v = Vector::Zero(4);
    v(0) = v(1) = 1.0 / std::sqrt(2.0);
    const DensityOperator coherent = DensityOperator::pure(PureState(model.space, v));
    const Trajectory traj =
        markov_evolve(coherent, model.h, model.proj, 1e-3, TimeGrid(0.0, 0.05, 2));
    REQUIRE(trace_distance(traj.states[0], model.proj.apply(coherent)) <= 1e-12);
}

TEST_CASE("alternating evolution never lowers the entropy") {
    auto model = make_model(43, 0.9);
    const Trajectory traj =
        alternating_evolve(model.rho0, model.h, model.proj, 0.2, 8.0);
    REQUIRE(traj.states.size() == 41);
    REQUIRE(trace_distance(traj.states[0], model.rho0) <= 1e-12);
    for (std::size_t i = 1; i < traj.diagnostics.size(); ++i)
        REQUIRE(traj.diagnostics[i].entropy >= traj.diagnostics[i - 1].entropy - 1e-10);
}

TEST_CASE("alternating evolution works with the nonlinear projection") {
    HilbertSpace space({Factor{"a", 2}, Factor{"b", 2}});
    RandomStream rng(47);
    const Hamiltonian h(space, random_hermitian(4, rng, 0.8));
    const ZwanzigProjection p = ZwanzigProjection::marginal_product(space, {"a"});
    const DensityOperator rho0 = DensityOperator::pure(PureState::basis_state(space, 1));
    const Trajectory traj = alternating_evolve(rho0, h, p, 0.25, 5.0);
    for (std::size_t i = 1; i < traj.diagnostics.size(); ++i)
        REQUIRE(traj.diagnostics[i].entropy >= traj.diagnostics[i - 1].entropy - 1e-10);
    // Every recorded state after step 0 is an exact product of its marginals.
    const DensityOperator& last = traj.states.back();
    REQUIRE(trace_distance(tensor(partial_trace(last, {"a"}), partial_trace(last, {"b"})),
                           last) <= 1e-8);
}

TEST_CASE("alternating evolution insists on commensurate times") {
    auto model = make_model(53, 0.5);
    REQUIRE_THROWS_AS(alternating_evolve(model.rho0, model.h, model.proj, 0.3, 1.0),
                      InvalidArgument);
    REQUIRE_THROWS_AS(alternating_evolve(model.rho0, model.h, model.proj, -0.1, 1.0),
                      InvalidArgument);
}
