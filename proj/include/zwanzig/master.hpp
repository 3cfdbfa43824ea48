#pragma once

#include <string>
#include <vector>

#include "zwanzig/dynamics.hpp"
#include "zwanzig/relevance.hpp"

namespace zwanzig {

struct StepDiagnostics {
    double trace_dev = 0.0;
    double entropy = 0.0;
    double positivity_margin = 0.0;  // smallest eigenvalue; negative means violation
};

struct Trajectory {
    TimeGrid grid;
    std::vector<DensityOperator> states;       // grid.steps + 1 entries
    std::vector<StepDiagnostics> diagnostics;  // aligned with states

    explicit Trajectory(TimeGrid g) : grid(g) {
        states.reserve(static_cast<std::size_t>(g.steps) + 1);
        diagnostics.reserve(static_cast<std::size_t>(g.steps) + 1);
    }
};

namespace detail {

// Validates and records one solver step. Trace drift beyond the coarse-step
// limit and non-finite values indicate solver misuse; anything still failing
// the (looser) solver-grade state checks is reported with step context.
inline void record_step(Trajectory& traj, const HilbertSpace& space, const Matrix& m,
                        int step, const char* solver,
                        const NumericalPolicy& policy = solver_policy()) {
    if (!m.allFinite())
        throw NumericGuard(std::string(solver) + ": non-finite state at step " +
                           std::to_string(step));
    const double drift = std::abs(m.trace() - Complex(1.0, 0.0));
    if (drift > default_policy().trace_drift_limit)
        throw NumericGuard(std::string(solver) + ": trace drift " + std::to_string(drift) +
                           " at step " + std::to_string(step) +
                           " (step size too coarse for this system)");
    // Approximate generators may produce transiently negative eigenvalues; the
    // diagnostics record the margin and only the hard floor aborts the run.
    NumericalPolicy recording = policy;
    recording.positivity_floor = policy.solver_positivity_hard_floor;
    Matrix h = 0.5 * (m + m.adjoint().eval());
    try {
        DensityOperator rho(space, std::move(h), recording);
        StepDiagnostics d{rho.trace_deviation(), von_neumann_entropy(rho),
                          rho.min_eigenvalue()};
        traj.states.push_back(std::move(rho));
        traj.diagnostics.push_back(d);
    } catch (const Error& e) {
        throw NumericGuard(std::string(solver) + ": invalid state at step " +
                           std::to_string(step) + ": " + e.what() +
                           " (step size too coarse or the approximation is outside its range)");
    }
}

// Cached eigendecomposition of H for repeated exact propagation.
class UnitaryCache {
public:
    explicit UnitaryCache(const Hamiltonian& h) : es_(h.matrix()) {
        if (es_.info() != Eigen::Success)
            throw NumericGuard("eigendecomposition of the Hamiltonian failed");
    }

    Matrix at(double t) const {
        const Vector phases =
            (Complex(0.0, -t) * es_.eigenvalues().cast<Complex>().array()).exp();
        return es_.eigenvectors() * phases.asDiagonal() * es_.eigenvectors().adjoint();
    }

private:
    Eigen::SelfAdjointEigenSolver<Matrix> es_;
};

} // namespace detail

// Ground truth for every solver comparison: project the exact unitary
// evolution of rho0 at each grid time. Works for nonlinear projections too.
inline Trajectory exact_projected_reference(const DensityOperator& rho0, const Hamiltonian& h,
                                            const ZwanzigProjection& p, const TimeGrid& grid) {
    if (rho0.space() != h.space() || rho0.space() != p.space())
        throw InvalidArgument("exact_projected_reference: spaces do not match");
    detail::UnitaryCache cache(h);
    Trajectory traj(grid);
    for (int n = 0; n <= grid.steps; ++n) {
        const Matrix u = cache.at(grid.time(n));
        const Matrix evolved = u * rho0.matrix() * u.adjoint();
        detail::record_step(traj, rho0.space(), p.apply(evolved), n,
                            "exact_projected_reference");
    }
    return traj;
}

// Integrand pieces of the memory-kernel equation, tabulated on a tau grid
// starting at 0: kernels[j] = P L e^{-i(1-P)L tau_j} (1-P) L and
// inhomogeneities[j] = P L e^{-i(1-P)L tau_j}.
struct MemoryKernel {
    std::vector<double> taus;
    std::vector<SuperOperator> kernels;
    std::vector<SuperOperator> inhomogeneities;
};

inline MemoryKernel build_memory_kernel(const Hamiltonian& h, const ZwanzigProjection& p,
                                        const TimeGrid& tau_grid) {
    if (!p.linear())
        throw LinearityError("build_memory_kernel requires a linear projection");
    if (h.space() != p.space())
        throw InvalidArgument("build_memory_kernel: spaces do not match");
    if (tau_grid.t0 != 0.0)
        throw InvalidArgument("build_memory_kernel: tau grid must start at 0");

    const Matrix lm = liouvillian(h).matrix();
    const Matrix& pm = p.superop().matrix();
    const Matrix pl = pm * lm;
    const Matrix ql = lm - pl;  // (1-P)L
    const Matrix step = matrix_exponential(Complex(0.0, -tau_grid.dt) * ql);

    MemoryKernel out;
    Matrix w = Matrix::Identity(lm.rows(), lm.cols());  // e^{-i(1-P)L tau}
    for (int j = 0; j <= tau_grid.steps; ++j) {
        out.taus.push_back(tau_grid.time(j));
        const Matrix plw = pl * w;
        out.kernels.emplace_back(h.space(), plw * ql, false);
        out.inhomogeneities.emplace_back(h.space(), plw, false);
        if (j < tau_grid.steps) w = step * w;
    }
    return out;
}

namespace detail {

// State of the convolution recurrences for the memory-kernel solver. With
// M = e^{-iA dt}, A = (1-P)L and v_j = A r_j, the trapezoid value of
// integral_0^{t_n} e^{-iA(t_n - s)} A r(s) ds equals
//   dt * (T_n - v_0-term/2 - v_n/2),  T_n = sum_j M^{n-j} v_j,
// so one matrix-vector product per step replaces re-summation of the full
// history. The half-step variant appends the trapezoid piece on
// [t_n, t_n + dt/2] evaluated with the midpoint stage state.
struct ConvolutionState {
    Vector history;  // T_n
    Vector leading;  // M^n v_0
    Vector inhom;    // M^n vec(rho_irr(0))
};

} // namespace detail

// Solves the exact memory-kernel equation for the relevant part,
//   d rho_rel/dt = -i P L rho_rel(t) - i P L e^{-i(1-P)L t} rho_irr(0)
//                  - integral_0^t dtau P L e^{-i(1-P)L tau} (1-P) L rho_rel(t - tau),
// with trapezoid quadrature for the convolution and an explicit-midpoint step
// (both second order). rho0 must already be relevant; rho_irr0 is the
// irrelevant component of the full initial state (zero for initially
// projector-invariant ensembles) and must satisfy P rho_irr0 = 0, tr = 0.
inline Trajectory premaster_evolve(const DensityOperator& rho0, const Matrix& rho_irr0,
                                   const Hamiltonian& h, const ZwanzigProjection& p,
                                   const TimeGrid& grid,
                                   const NumericalPolicy& policy = default_policy()) {
    if (!p.linear())
        throw LinearityError("premaster_evolve requires a linear projection");
    if (rho0.space() != h.space() || rho0.space() != p.space())
        throw InvalidArgument("premaster_evolve: spaces do not match");
    const int d = rho0.dim();
    if (max_abs(p.apply(rho0.matrix()) - rho0.matrix()) > policy.idempotence_tol)
        throw InvalidArgument("premaster_evolve: initial state is not relevant "
                              "(not invariant under the projection)");
    if (rho_irr0.rows() != d || rho_irr0.cols() != d)
        throw DimensionError("premaster_evolve: rho_irr0 size does not match the space");
    if (max_abs(rho_irr0) > 0.0) {
        if (!is_hermitian(rho_irr0, policy.hermitian_input_tol))
            throw InvalidArgument("premaster_evolve: rho_irr0 must be Hermitian");
        if (max_abs(p.apply(rho_irr0)) > policy.idempotence_tol)
            throw InvalidArgument("premaster_evolve: rho_irr0 has a relevant component");
        if (std::abs(rho_irr0.trace()) > policy.hermitian_input_tol)
            throw InvalidArgument("premaster_evolve: rho_irr0 must be traceless");
    }

    const double dt = grid.dt;
    const Matrix lm = liouvillian(h).matrix();
    const Matrix pl = p.superop().matrix() * lm;
    const Matrix a = lm - pl;  // (1-P)L
    const Matrix m_full = matrix_exponential(Complex(0.0, -dt) * a);
    const Matrix m_half = matrix_exponential(Complex(0.0, -dt / 2.0) * a);
    const Complex mi(0.0, -1.0);

    Vector r = vectorize(rho0.matrix());
    Vector v = a * r;
    detail::ConvolutionState conv{v, v, vectorize(rho_irr0)};

    Trajectory traj(grid);
    detail::record_step(traj, rho0.space(), rho0.matrix(), 0, "premaster_evolve");

    for (int n = 0; n < grid.steps; ++n) {
        // Trapezoid integral at t_n, then the two-stage midpoint step.
        const Vector core = conv.history - 0.5 * conv.leading - 0.5 * v;
        const Vector k1 = mi * (pl * (r + conv.inhom)) - pl * (dt * core);

        const Vector r_half = r + (dt / 2.0) * k1;
        const Vector v_half = a * r_half;
        const Vector u_half =
            dt * (m_half * core) + (dt / 4.0) * (m_half * v + v_half);
        const Vector k2 =
            mi * (pl * (r_half + m_half * conv.inhom)) - pl * u_half;

        r += dt * k2;
        v = a * r;
        conv.history = m_full * conv.history + v;
        conv.leading = m_full * conv.leading;
        conv.inhom = m_full * conv.inhom;

        detail::record_step(traj, rho0.space(), devectorize(r, d), n + 1,
                            "premaster_evolve");
    }
    return traj;
}

inline Trajectory premaster_evolve(const DensityOperator& rho0, const Hamiltonian& h,
                                   const ZwanzigProjection& p, const TimeGrid& grid,
                                   const NumericalPolicy& policy = default_policy()) {
    return premaster_evolve(rho0, Matrix::Zero(rho0.dim(), rho0.dim()), h, p, grid, policy);
}

// Markovian generator G = -P L [i(1-P)L + eps]^{-1} (1-P)L, the
// resolvent-regularized long-memory limit of the kernel integral. For eps > 0
// the resolvent is never singular (the spectrum of i(1-P)L on the irrelevant
// subspace is purely imaginary), but the solve is residual-checked anyway.
inline SuperOperator markov_generator(const Hamiltonian& h, const ZwanzigProjection& p,
                                      double epsilon) {
    if (!p.linear())
        throw LinearityError("markov_generator requires a linear projection");
    if (h.space() != p.space())
        throw InvalidArgument("markov_generator: spaces do not match");
    if (epsilon <= 0.0)
        throw InvalidArgument("markov_generator: regularizer must be positive");

    const Matrix lm = liouvillian(h).matrix();
    const Matrix pl = p.superop().matrix() * lm;
    const Matrix ql = lm - pl;
    const Eigen::Index n = lm.rows();
    const Matrix b = Complex(0.0, 1.0) * ql + epsilon * Matrix::Identity(n, n);
    const Matrix x = b.partialPivLu().solve(ql);
    const double residual = max_abs(b * x - ql);
    if (residual > 1e-8 * std::max(1.0, max_abs(ql)))
        throw NumericGuard("markov_generator: resolvent solve failed (residual " +
                           std::to_string(residual) + ") at the requested regularizer");
    Matrix g = -(pl * x);
    const bool preserves = detail::preserves_hermiticity(g);
    return SuperOperator(h.space(), std::move(g), preserves);
}

// Propagates the relevant part with the time-independent Markov generator:
// rho_rel(t_n) = e^{G t_n} P rho0. The generator is the complete right side
// (no separate streaming term), matching its defining master-equation form.
inline Trajectory markov_evolve(const DensityOperator& rho0, const Hamiltonian& h,
                                const ZwanzigProjection& p, double epsilon,
                                const TimeGrid& grid) {
    const SuperOperator g = markov_generator(h, p, epsilon);
    if (rho0.space() != h.space())
        throw InvalidArgument("markov_evolve: spaces do not match");
    const Matrix e = matrix_exponential(grid.dt * g.matrix());
    Vector r = vectorize(p.apply(rho0.matrix()));

    Trajectory traj(grid);
    detail::record_step(traj, rho0.space(), devectorize(r, rho0.dim()), 0,
                        "markov_evolve");
    for (int n = 1; n <= grid.steps; ++n) {
        r = e * r;
        detail::record_step(traj, rho0.space(), devectorize(r, rho0.dim()), n,
                            "markov_evolve");
    }
    return traj;
}

// Alternates exact unitary strides with the projection. The only dynamical
// entry point for nonlinear projections. Entropy never decreases along the
// trajectory: unitary strides preserve it, projections raise it.
inline Trajectory alternating_evolve(const DensityOperator& rho0, const Hamiltonian& h,
                                     const ZwanzigProjection& p, double coarse_dt,
                                     double total_t) {
    if (rho0.space() != h.space() || rho0.space() != p.space())
        throw InvalidArgument("alternating_evolve: spaces do not match");
    if (coarse_dt <= 0.0) throw InvalidArgument("alternating_evolve: coarse_dt must be positive");
    if (total_t <= 0.0) throw InvalidArgument("alternating_evolve: total time must be positive");
    const double ratio = total_t / coarse_dt;
    const int steps = static_cast<int>(std::round(ratio));
    if (steps < 1 || std::abs(ratio - steps) > 1e-9 * std::max(1.0, ratio))
        throw InvalidArgument(
            "alternating_evolve: total time must be an integer multiple of coarse_dt");

    detail::UnitaryCache cache(h);
    const Matrix u = cache.at(coarse_dt);

    Trajectory traj(TimeGrid(0.0, coarse_dt, steps));
    Matrix m = rho0.matrix();
    detail::record_step(traj, rho0.space(), m, 0, "alternating_evolve");
    for (int n = 1; n <= steps; ++n) {
        m = p.apply(u * m * u.adjoint());
        detail::record_step(traj, rho0.space(), m, n, "alternating_evolve");
    }
    return traj;
}

} // namespace zwanzig
