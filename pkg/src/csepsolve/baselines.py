"""Competitor strong-convergence hybrids used for comparison.

Both methods pay per-iteration costs the cutting-halfspace solvers avoid:
the extragradient hybrid solves a second (corrector) subproblem, and the
Armijo hybrid runs a backtracking linesearch plus an extra projection onto
the feasible set.  Their acceptance sets are subsets of C, so the anchor
projection targets C intersected with two linearized cuts (alternating
projections), not just the two halfspaces.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .errors import (
    LinesearchFailed,
    MaxInnerIterationsExceeded,
    ParameterViolation,
    SolverError,
)
from .geometry import (
    as_point,
    dykstra,
    project_halfspace,
    project_halfspace_intersection,
)
from .hybrid import (
    ANCHOR_PROJECTION_TOL,
    CONTAINMENT_SLACK,
    DISTANCE_BOUND_SLACK,
    MONOTONE_SLACK,
    build_c_cut,
    build_q_cut,
)
from .outcome import (
    STOP_ERROR,
    STOP_MAX_OUTER,
    STOP_TOLERANCE,
    IterationRecord,
    RunCounters,
    SolverOutcome,
)
from .problems import CsepInstance
from .prox import solve_prox


@dataclass
class ArmijoParams:
    """Backtracking parameters: ratio eta in (0,1), prox step lam > 0, trial cap."""

    eta: float
    lam: float
    max_linesearch: int = 60

    def __post_init__(self):
        if not 0.0 < self.eta < 1.0:
            raise ParameterViolation("eta must lie strictly between 0 and 1")
        if not self.lam > 0.0:
            raise ParameterViolation("lam must be positive")
        if self.max_linesearch < 1:
            raise ParameterViolation("max_linesearch must be at least 1")


def armijo_linesearch(f, x_n, y_n, lam, params: ArmijoParams):
    """Smallest m >= 1 with f((1-eta^m) x_n + eta^m y_n, y_n) <= -||x_n-y_n||^2/(2 lam).

    Starts at m = 1: the m = 0 mixing weight would zero the denominator of
    the step-size formula downstream, and the m = 0 test can never hold
    anyway since f vanishes on the diagonal.  Returns (m, z) with z the
    accepted convex combination.
    """
    x_n = as_point(x_n)
    y_n = as_point(y_n, x_n.size)
    gap2 = float((x_n - y_n) @ (x_n - y_n))
    if gap2 == 0.0:
        raise LinesearchFailed("linesearch requires x_n != y_n (already converged)")
    threshold = gap2 / (2.0 * lam)
    value = np.inf
    for m in range(1, params.max_linesearch + 1):
        t = params.eta**m
        z = (1.0 - t) * x_n + t * y_n
        value = f.value(z, y_n)
        if value + threshold <= 0.0:
            return m, z
    raise LinesearchFailed(
        f"no admissible exponent within {params.max_linesearch} trials",
        last_value=value,
    )


def armijo_step_size(f, z, y_n, m, eta):
    """Relaxation step -eta^m f(z, y_n) / ((1 - eta^m) ||g||^2) with
    g a subgradient of f(z, .) at z; zero when g vanishes (then z already
    minimizes f(z, .) and no relaxation is possible)."""
    g = f.subgrad2(z, z)
    g_sq = float(g @ g)
    if g_sq <= 1e-300:
        return 0.0, g
    t = eta**m
    return -t * f.value(z, y_n) / ((1.0 - t) * g_sq), g


def _project_onto_set_and_cuts(set_, cuts, x0, counters, tol=1e-12):
    """Projection of x0 onto C intersected with the given halfspace cuts.

    Polyhedral sets (boxes, cut intersections) fold their faces into a single
    halfspace projection, which stays exact when the cuts become nearly
    parallel near convergence; other sets alternate projections, counting one
    set projection per cycle.
    """
    live = [c for c in cuts if not c.is_whole_space]
    if hasattr(set_, "as_halfspaces"):
        counters.set_projections += 1
        return project_halfspace_intersection(set_.as_halfspaces() + live, x0,
                                              tol=tol)

    def count_set_projection(v):
        counters.set_projections += 1
        return set_.project(v)

    if not live:
        return count_set_projection(x0)
    projectors = [count_set_projection]
    projectors.extend(
        (lambda v, c=c: project_halfspace(c, v)) for c in live
    )
    try:
        return dykstra(projectors, x0, tol=max(tol, 1e-10))
    except MaxInnerIterationsExceeded as exc:
        raise MaxInnerIterationsExceeded(
            "anchor projection onto the feasible set with the acceptance cuts "
            f"stalled ({exc}); this inner problem is exactly the per-iteration "
            "cost the cut-only solvers avoid",
            violations=exc.violations,
            best=exc.best,
        ) from exc


def _check_invariants(violations, cuts, x, x_next, x0, anchor_dist,
                      known_point, near_points):
    """Shared per-iteration checks; returns the updated anchor distance."""
    q_cut = cuts[-1]
    if not q_cut.is_whole_space:
        p = project_halfspace(q_cut, x0)
        if float(np.linalg.norm(p - x)) > ANCHOR_PROJECTION_TOL * (
            1.0 + float(np.linalg.norm(x0))
        ):
            violations["anchor_projection"] += 1
    next_dist = float(np.linalg.norm(x_next - x0))
    if next_dist < anchor_dist - MONOTONE_SLACK:
        violations["anchor_monotonicity"] += 1
    if known_point is not None:
        for cut in cuts:
            if cut.violation(known_point) > CONTAINMENT_SLACK:
                violations["cut_containment"] += 1
        ref = float(np.linalg.norm(x - known_point))
        for pt in near_points:
            if float(np.linalg.norm(pt - known_point)) > ref + DISTANCE_BOUND_SLACK:
                violations["solution_distance_bound"] += 1
    return next_dist


def _new_violations():
    return {
        "cut_containment": 0,
        "solution_distance_bound": 0,
        "anchor_monotonicity": 0,
        "anchor_projection": 0,
    }


def run_hybrid_extragradient(
    instance: CsepInstance,
    lam: float,
    tol: float = 1e-8,
    max_outer: int = 100_000,
    *,
    known_point=None,
    certify_probes: int = 0,
    seed: int = 0,
    check_invariants: bool = True,
    collect_iterates: bool = False,
) -> SolverOutcome:
    """Two-subproblem hybrid: predictor anchored at x_n, corrector at the
    predictor, then the anchor is projected onto C and two linearized cuts.

    Requires a single equilibrium problem, a starting point inside C, and
    lam below min(1/(2 c1), 1/(2 c2)).
    """
    if instance.n_problems != 1:
        raise ParameterViolation("the extragradient baseline requires N = 1")
    f = instance.bifunctions[0]
    lip = f.lipschitz_data()
    lam_cap = min(1.0 / (2.0 * lip.c1), 1.0 / (2.0 * lip.c2)) if min(lip.c1, lip.c2) > 0 else np.inf
    if not 0.0 < lam < lam_cap:
        raise ParameterViolation(
            f"lam={lam:g} outside (0, {lam_cap:g}) for c1={lip.c1:g}, c2={lip.c2:g}"
        )
    set_ = instance.set
    x0 = as_point(instance.x0, instance.dimension)
    if not set_.contains(x0, 1e-9):
        raise ParameterViolation("the baseline schemes require x0 in C")
    if known_point is not None:
        known_point = as_point(known_point, instance.dimension)

    counters = RunCounters()
    violations = _new_violations()
    trace: list[IterationRecord] = []
    iterates: list[np.ndarray] = []
    min_cert = np.inf
    anchor_dist = 0.0
    x = x0.copy()
    stop_reason = STOP_MAX_OUTER
    error_msg = None

    try:
        for n in range(1, max_outer + 1):
            t0 = time.perf_counter()
            rng = np.random.default_rng((seed, n, 0)) if certify_probes > 0 else None
            res_y = solve_prox(f, x, x, lam, set_, certify_probes=certify_probes, rng=rng)
            rng = np.random.default_rng((seed, n, 1)) if certify_probes > 0 else None
            res_z = solve_prox(f, res_y.minimizer, x, lam, set_,
                               certify_probes=certify_probes, rng=rng)
            y, z = res_y.minimizer, res_z.minimizer
            counters.prox_solves += 2
            for r in (res_y, res_z):
                counters.set_projections += r.inner_iterations
                if not np.isnan(r.certificate_gap):
                    min_cert = min(min_cert, r.certificate_gap)

            cuts = [build_c_cut(x, z, 0.0), build_q_cut(x0, x)]
            x_next = _project_onto_set_and_cuts(set_, cuts, x0, counters)
            step_norm = float(np.linalg.norm(x_next - x))
            residual = max(
                float(np.linalg.norm(y - x)), float(np.linalg.norm(z - x))
            )

            if check_invariants:
                anchor_dist = _check_invariants(
                    violations, cuts, x, x_next, x0, anchor_dist, known_point, [z]
                )

            dist_known = (
                float(np.linalg.norm(x_next - known_point))
                if known_point is not None
                else float("nan")
            )
            trace.append(
                IterationRecord(
                    n=n,
                    step_norm=step_norm,
                    residual=residual,
                    eps_min=0.0,
                    eps_max=0.0,
                    dist_to_known=dist_known,
                    wall_ms=(time.perf_counter() - t0) * 1e3,
                    degenerate_cuts=sum(c.is_whole_space for c in cuts),
                )
            )
            if collect_iterates:
                iterates.append(x_next.copy())
            x = x_next
            if max(step_norm, residual) <= tol:
                stop_reason = STOP_TOLERANCE
                break
    except SolverError as exc:
        stop_reason = STOP_ERROR
        error_msg = str(exc)

    return SolverOutcome(
        algorithm="extragradient",
        final_x=x,
        stop_reason=stop_reason,
        iterations=len(trace),
        trace=trace,
        invariant_violations=violations,
        counters=counters,
        min_prox_certificate=float(min_cert) if np.isfinite(min_cert) else float("nan"),
        error=error_msg,
        iterates=iterates if collect_iterates else None,
    )


def run_armijo_hybrid(
    instance: CsepInstance,
    params: ArmijoParams,
    tol: float = 1e-8,
    max_outer: int = 100_000,
    *,
    known_point=None,
    certify_probes: int = 0,
    seed: int = 0,
    check_invariants: bool = True,
    collect_iterates: bool = False,
) -> SolverOutcome:
    """Linesearch hybrid: one subproblem, then a backtracking linesearch, a
    subgradient step projected onto C, and the anchor projection onto C plus
    two linearized cuts.

    The subgradient step length is -eta^m f(z, y) / ((1 - eta^m) ||g||^2)
    with g a subgradient of f(z, .) at z, taken as zero when g vanishes
    (then z already minimizes f(z, .) and the relaxation point is x_n).
    """
    if instance.n_problems != 1:
        raise ParameterViolation("the Armijo baseline requires N = 1")
    f = instance.bifunctions[0]
    set_ = instance.set
    x0 = as_point(instance.x0, instance.dimension)
    if not set_.contains(x0, 1e-9):
        raise ParameterViolation("the baseline schemes require x0 in C")
    if known_point is not None:
        known_point = as_point(known_point, instance.dimension)

    counters = RunCounters()
    violations = _new_violations()
    trace: list[IterationRecord] = []
    iterates: list[np.ndarray] = []
    min_cert = np.inf
    anchor_dist = 0.0
    x = x0.copy()
    stop_reason = STOP_MAX_OUTER
    error_msg = None

    try:
        for n in range(1, max_outer + 1):
            t0 = time.perf_counter()
            rng = np.random.default_rng((seed, n, 0)) if certify_probes > 0 else None
            res_y = solve_prox(f, x, x, params.lam, set_,
                               certify_probes=certify_probes, rng=rng)
            y = res_y.minimizer
            counters.prox_solves += 1
            counters.set_projections += res_y.inner_iterations
            if not np.isnan(res_y.certificate_gap):
                min_cert = min(min_cert, res_y.certificate_gap)

            residual = float(np.linalg.norm(y - x))
            if residual <= tol:
                trace.append(
                    IterationRecord(
                        n=n,
                        step_norm=0.0,
                        residual=residual,
                        eps_min=0.0,
                        eps_max=0.0,
                        dist_to_known=(
                            float(np.linalg.norm(x - known_point))
                            if known_point is not None
                            else float("nan")
                        ),
                        wall_ms=(time.perf_counter() - t0) * 1e3,
                    )
                )
                if collect_iterates:
                    iterates.append(x.copy())
                stop_reason = STOP_TOLERANCE
                break

            m, z = armijo_linesearch(f, x, y, params.lam, params)
            sigma, g = armijo_step_size(f, z, y, m, params.eta)
            u = set_.project(x - sigma * g)
            counters.set_projections += 1

            cuts = [build_c_cut(x, u, 0.0), build_q_cut(x0, x)]
            x_next = _project_onto_set_and_cuts(set_, cuts, x0, counters)
            step_norm = float(np.linalg.norm(x_next - x))

            if check_invariants:
                anchor_dist = _check_invariants(
                    violations, cuts, x, x_next, x0, anchor_dist, known_point, [u]
                )

            dist_known = (
                float(np.linalg.norm(x_next - known_point))
                if known_point is not None
                else float("nan")
            )
            trace.append(
                IterationRecord(
                    n=n,
                    step_norm=step_norm,
                    residual=residual,
                    eps_min=0.0,
                    eps_max=0.0,
                    dist_to_known=dist_known,
                    wall_ms=(time.perf_counter() - t0) * 1e3,
                    degenerate_cuts=sum(c.is_whole_space for c in cuts),
                )
            )
            if collect_iterates:
                iterates.append(x_next.copy())
            x = x_next
            if max(step_norm, residual) <= tol:
                stop_reason = STOP_TOLERANCE
                break
    except SolverError as exc:
        stop_reason = STOP_ERROR
        error_msg = str(exc)

    return SolverOutcome(
        algorithm="armijo",
        final_x=x,
        stop_reason=stop_reason,
        iterations=len(trace),
        trace=trace,
        invariant_violations=violations,
        counters=counters,
        min_prox_certificate=float(min_cert) if np.isfinite(min_cert) else float("nan"),
        error=error_msg,
        iterates=iterates if collect_iterates else None,
    )
