"""Extra-step-free hybrid solvers built on cutting halfspaces.

Each outer iteration solves one proximal subproblem per equilibrium problem
(anchored at the previous subproblem solution, not at the current iterate,
which is what removes the extragradient corrector step), builds halfspace
cuts certified to contain the solution set, and projects the fixed anchor
x0 onto their intersection.  Four variants:

* ``run_parallel_hybrid`` - one cut per subproblem, N+1 halfspaces total;
* ``run_maxsel_hybrid``   - shared anchor sequence, the farthest subproblem
  solution defines a single cut, two halfspaces total;
* ``run_single``          - the N = 1 specialization;
* ``run_sequential``      - one subproblem per iteration, cycled.

The correction term added to each cut keeps the solution set inside despite
the missing corrector step; it may be negative and is used unclamped.
"""

from __future__ import annotations

import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .errors import InfeasibleCut, ParameterViolation, SolverError
from .geometry import (
    HalfspaceCut,
    as_point,
    project_halfspace,
    project_halfspace_intersection,
)
from .outcome import (
    STOP_ERROR,
    STOP_MAX_OUTER,
    STOP_TOLERANCE,
    IterationRecord,
    RunCounters,
    SolverOutcome,
)
from .problems import CsepInstance, LipschitzData
from .prox import solve_prox

RULE_STRICT = "strict"
RULE_RELAXED = "relaxed"

# Slacks for the per-iteration checks.
CONTAINMENT_SLACK = 1e-8
DISTANCE_BOUND_SLACK = 1e-8
MONOTONE_SLACK = 1e-12
ANCHOR_PROJECTION_TOL = 1e-10


@dataclass
class HybridParams:
    """Step size lam, cut-inflation constant k, stopping tolerance, and caps.

    ``rule`` selects the admissible (lam, k) region: "strict" requires
    lam < 1/(2(c1+c2)) and k > 1/(1 - 2 lam (c1+c2)); "relaxed" requires
    lam < 1/(c1+c2) and k > 1/(1 - lam (c1+c2)).  Strict satisfies both
    published bound families and is the default everywhere.
    """

    lam: float
    k: float
    tol: float = 1e-8
    max_outer: int = 100_000
    rule: str = RULE_STRICT

    def __post_init__(self):
        if self.rule not in (RULE_STRICT, RULE_RELAXED):
            raise ParameterViolation(f"unknown rule {self.rule!r}")
        if not self.tol >= 0.0:
            raise ParameterViolation("tol must be nonnegative")
        if self.max_outer < 1:
            raise ParameterViolation("max_outer must be at least 1")


def validate_params(params: HybridParams, c1: float, c2: float) -> None:
    """Check (lam, k) against the bound family selected by ``params.rule``."""
    s = c1 + c2
    factor = 2.0 if params.rule == RULE_STRICT else 1.0
    if not 0.0 < params.lam < 1.0 / (factor * s):
        raise ParameterViolation(
            f"lam={params.lam:g} outside (0, {1.0 / (factor * s):g}) "
            f"for rule={params.rule} with c1+c2={s:g}"
        )
    k_floor = 1.0 / (1.0 - factor * params.lam * s)
    if not params.k > k_floor:
        raise ParameterViolation(
            f"k={params.k:g} must exceed {k_floor:g} for rule={params.rule}"
        )


def epsilon(
    params: HybridParams, lip: LipschitzData, dx: float, dy_prev: float, dy: float
) -> float:
    """Cut correction term from squared displacements.

    ``dx``, ``dy_prev``, ``dy`` are ||x_n - x_{n-1}||^2, ||y_n - y_{n-1}||^2
    and ||y_{n+1} - y_n||^2.  May be negative; never clamped (the signed
    third term is what drives the residuals to zero).
    """
    return (
        params.k * dx
        + 2.0 * params.lam * lip.c1 * dy_prev
        - (1.0 - 1.0 / params.k - 2.0 * params.lam * lip.c2) * dy
    )


def build_c_cut(x_n: np.ndarray, y_next: np.ndarray, eps: float) -> HalfspaceCut:
    """Linearized cut {z : ||y_next - z||^2 <= ||x_n - z||^2 + eps}.

    Expands to 2<x_n - y_next, z> <= <x_n + y_next, x_n - y_next> + eps.
    Collapses to the whole space when y_next == x_n and the residual scalar
    inequality 0 <= eps holds; a contradictory collapse raises.
    """
    diff = x_n - y_next
    rhs = float((x_n + y_next) @ diff) + eps
    if float(np.linalg.norm(diff)) < 1e-14:
        if rhs < -1e-12:
            raise InfeasibleCut(
                f"cut degenerated to the contradiction 0 <= {rhs:g}"
            )
        return HalfspaceCut(np.zeros_like(x_n), rhs)
    return HalfspaceCut(2.0 * diff, rhs)


def build_q_cut(x0: np.ndarray, x_n: np.ndarray) -> HalfspaceCut:
    """Anchor cut {z : <x0 - x_n, z - x_n> <= 0}; the whole space when x_n == x0."""
    normal = x0 - x_n
    return HalfspaceCut(normal, float(normal @ x_n))


def cyclic_index(n: int, n_problems: int) -> int:
    """0-based subproblem index for outer iteration n of the cyclic variant
    (iteration 1 works on subproblem 2 when more than one is present)."""
    return n % n_problems


def run_parallel_hybrid(instance: CsepInstance, params: HybridParams, **kw) -> SolverOutcome:
    """All subproblems per iteration; anchor projected onto N+1 halfspaces."""
    return _run("parallel", instance, params, **kw)


def run_maxsel_hybrid(instance: CsepInstance, params: HybridParams, **kw) -> SolverOutcome:
    """All subproblems per iteration; the farthest solution defines one cut."""
    return _run("maxsel", instance, params, **kw)


def run_single(instance: CsepInstance, params: HybridParams, **kw) -> SolverOutcome:
    """Single equilibrium problem; two-halfspace projection each iteration."""
    if instance.n_problems != 1:
        raise ParameterViolation("run_single requires an instance with N = 1")
    outcome = _run("maxsel", instance, params, **kw)
    outcome.algorithm = "single"
    return outcome


def run_sequential(instance: CsepInstance, params: HybridParams, **kw) -> SolverOutcome:
    """One subproblem per iteration, cycled modulo N."""
    return _run("sequential", instance, params, **kw)


def _run(
    mode: str,
    instance: CsepInstance,
    params: HybridParams,
    *,
    workers: int = 1,
    known_point: np.ndarray | None = None,
    certify_probes: int = 0,
    seed: int = 0,
    check_invariants: bool = True,
    collect_iterates: bool = False,
) -> SolverOutcome:
    n_problems = instance.n_problems
    fs = instance.bifunctions
    lips = instance.lipschitz_all()
    c1_max = max(d.c1 for d in lips)
    c2_max = max(d.c2 for d in lips)
    validate_params(params, c1_max, c2_max)
    lip_shared = LipschitzData(c1_max, c2_max)

    set_ = instance.set
    x0 = as_point(instance.x0, instance.dimension)
    if known_point is not None:
        known_point = as_point(known_point, instance.dimension)

    counters = RunCounters()
    violations = {
        "cut_containment": 0,
        "solution_distance_bound": 0,
        "anchor_monotonicity": 0,
        "anchor_projection": 0,
    }

    y_init = set_.project(x0)
    counters.set_projections += 1

    x_prev = x0.copy()
    x = x0.copy()
    if mode == "parallel":
        y_prev = [y_init.copy() for _ in range(n_problems)]
        y_cur = [y_init.copy() for _ in range(n_problems)]
    else:
        ybar_prev = y_init.copy()
        ybar = y_init.copy()
        last_y = [y_init.copy() for _ in range(n_problems)]

    pool = ThreadPoolExecutor(max_workers=workers) if workers > 1 else None

    def _solve_all(anchors, n):
        def one(i):
            rng = (
                np.random.default_rng((seed, n, i)) if certify_probes > 0 else None
            )
            return solve_prox(
                fs[i],
                anchors[i],
                x,
                params.lam,
                set_,
                certify_probes=certify_probes,
                rng=rng,
            )
        if pool is None:
            return [one(i) for i in range(n_problems)]
        return list(pool.map(one, range(n_problems)))

    trace: list[IterationRecord] = []
    iterates: list[np.ndarray] = []
    min_cert = np.inf
    anchor_dist = 0.0
    stop_reason = STOP_MAX_OUTER
    error_msg = None

    try:
        for n in range(1, params.max_outer + 1):
            t0 = time.perf_counter()
            dx2 = float((x - x_prev) @ (x - x_prev))
            selected = None

            if mode == "parallel":
                results = _solve_all(y_cur, n)
                counters.prox_solves += n_problems
                y_next = [r.minimizer for r in results]
                eps_list = [
                    epsilon(
                        params,
                        lips[i],
                        dx2,
                        float((y_cur[i] - y_prev[i]) @ (y_cur[i] - y_prev[i])),
                        float((y_next[i] - y_cur[i]) @ (y_next[i] - y_cur[i])),
                    )
                    for i in range(n_problems)
                ]
                cuts = [
                    build_c_cut(x, y_next[i], eps_list[i]) for i in range(n_problems)
                ]
                cuts.append(build_q_cut(x0, x))
                x_next = project_halfspace_intersection(cuts, x0)
                residual = max(
                    float(np.linalg.norm(y_next[i] - x)) for i in range(n_problems)
                )
                fejer_pairs = list(zip(y_next, eps_list))
            elif mode == "maxsel":
                results = _solve_all([ybar] * n_problems, n)
                counters.prox_solves += n_problems
                y_next = [r.minimizer for r in results]
                dists = [float(np.linalg.norm(yi - x)) for yi in y_next]
                selected = int(np.argmax(dists))
                ybar_next = y_next[selected]
                eps_val = epsilon(
                    params,
                    lip_shared,
                    dx2,
                    float((ybar - ybar_prev) @ (ybar - ybar_prev)),
                    float((ybar_next - ybar) @ (ybar_next - ybar)),
                )
                eps_list = [eps_val]
                cuts = [build_c_cut(x, ybar_next, eps_val), build_q_cut(x0, x)]
                x_next = project_halfspace_intersection(cuts, x0)
                residual = max(dists)
                fejer_pairs = [(yi, eps_val) for yi in y_next]
            else:  # sequential
                i = cyclic_index(n, n_problems)
                selected = i
                rng = (
                    np.random.default_rng((seed, n, i)) if certify_probes > 0 else None
                )
                res = solve_prox(
                    fs[i], ybar, x, params.lam, set_,
                    certify_probes=certify_probes, rng=rng,
                )
                results = [res]
                counters.prox_solves += 1
                y_next_pt = res.minimizer
                eps_val = epsilon(
                    params,
                    lip_shared,
                    dx2,
                    float((ybar - ybar_prev) @ (ybar - ybar_prev)),
                    float((y_next_pt - ybar) @ (y_next_pt - ybar)),
                )
                eps_list = [eps_val]
                cuts = [build_c_cut(x, y_next_pt, eps_val), build_q_cut(x0, x)]
                x_next = project_halfspace_intersection(cuts, x0)
                last_y[i] = y_next_pt
                residual = max(float(np.linalg.norm(yi - x)) for yi in last_y)
                fejer_pairs = [(y_next_pt, eps_val)]

            for r in results:
                counters.set_projections += r.inner_iterations
                if not np.isnan(r.certificate_gap):
                    min_cert = min(min_cert, r.certificate_gap)

            step_norm = float(np.linalg.norm(x_next - x))

            if check_invariants:
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
                anchor_dist = next_dist
                if known_point is not None:
                    for cut in cuts:
                        if cut.violation(known_point) > CONTAINMENT_SLACK:
                            violations["cut_containment"] += 1
                    ref_sq = float((x - known_point) @ (x - known_point))
                    for y_pt, eps_val in fejer_pairs:
                        lhs = float((y_pt - known_point) @ (y_pt - known_point))
                        if lhs > ref_sq + eps_val + DISTANCE_BOUND_SLACK:
                            violations["solution_distance_bound"] += 1

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
                    eps_min=float(min(eps_list)),
                    eps_max=float(max(eps_list)),
                    dist_to_known=dist_known,
                    wall_ms=(time.perf_counter() - t0) * 1e3,
                    degenerate_cuts=sum(c.is_whole_space for c in cuts),
                    selected_index=selected,
                )
            )
            if collect_iterates:
                iterates.append(x_next.copy())

            x_prev, x = x, x_next
            if mode == "parallel":
                y_prev, y_cur = y_cur, y_next
            elif mode == "maxsel":
                ybar_prev, ybar = ybar, ybar_next
            else:
                ybar_prev, ybar = ybar, y_next_pt

            if max(step_norm, residual) <= params.tol:
                stop_reason = STOP_TOLERANCE
                break
    except SolverError as exc:
        stop_reason = STOP_ERROR
        error_msg = str(exc)
    finally:
        if pool is not None:
            pool.shutdown()

    return SolverOutcome(
        algorithm=mode,
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
