#pragma once

namespace zwanzig {

// Central numerical policy. Every tolerance used by constructors, projections and
// solvers lives here so property tests have a single knob.
struct NumericalPolicy {
    // Constructor-grade invariants.
    double hermiticity_tol     = 1e-12;  // max |M - M†| entry
    double unit_trace_tol      = 1e-12;  // |tr(rho) - 1|
    double unit_norm_tol       = 1e-12;  // | ||psi|| - 1 |
    double positivity_floor    = -1e-10; // smallest admissible eigenvalue

    // Looser input gate for operations that accept nearly-Hermitian matrices.
    double hermitian_input_tol = 1e-10;

    // Structural checks.
    double reconstruction_tol  = 1e-10;  // spectral / Schmidt rebuild error
    double idempotence_tol     = 1e-10;  // projectors and Zwanzig projections
    double orthonormality_tol  = 1e-10;  // bases, partitions, Schmidt factors

    // Entropy and Schmidt handling.
    double entropy_eigenvalue_clip = 1e-14; // eigenvalues below this count as 0
    double schmidt_rank_cutoff     = 1e-12; // coefficients below this are dropped
    double schmidt_degeneracy_gap  = 1e-10; // closer coefficients set the degeneracy flag

    // Solver guards.
    double solver_trace_tol       = 1e-8;  // per-step |tr(rho) - 1| for trajectories
    double solver_positivity_tol  = -1e-6; // eigenvalue floor for high-accuracy solvers
    double trace_drift_limit      = 1e-4;  // beyond this the step size is rejected
    // Approximate generators (resolvent-limit, inhomogeneous kernel runs) are
    // trace preserving but not completely positive, so recorded states may dip
    // transiently negative by a physically meaningful amount. Anything below
    // this floor is treated as integrator failure rather than approximation
    // error. A unit-trace state reached by a Hilbert-Schmidt contraction from
    // a pure state cannot have an eigenvalue below -1.
    double solver_positivity_hard_floor = -0.5;

    // Dense Liouville-space algebra scales as dim^6; the cap keeps runs tractable.
    int max_total_dim = 64;
};

inline const NumericalPolicy& default_policy() {
    static const NumericalPolicy policy{};
    return policy;
}

// Policy variant used when validating states emitted by time steppers, which
// accumulate quadrature error beyond constructor precision.
inline NumericalPolicy solver_policy() {
    NumericalPolicy p = default_policy();
    p.unit_trace_tol = p.solver_trace_tol;
    p.positivity_floor = p.solver_positivity_tol;
    return p;
}

} // namespace zwanzig
