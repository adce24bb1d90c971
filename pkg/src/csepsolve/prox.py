"""Inner subproblem: argmin over C of  lam*f(w, y) + 0.5*||x - y||^2.

The objective is 1-strongly convex, so the minimizer is unique.  Operator-
induced bifunctions admit the exact solution P_C(x - lam*A(w)); the
affine-quadratic family is solved by projected gradient (or an exact
coordinate solve on boxes when Q is diagonal); black-box bifunctions fall
back to a projected subgradient scheme in which the quadratic part is kept
in closed form each step.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NonFiniteObjective
from .geometry import Box, FeasibleSet, WholeSpace
from .problems import (
    AffineQuadraticBifunction,
    Bifunction,
    ViInducedBifunction,
)

# Inner tolerances sit well below the outer stopping tolerance because the
# cutting halfspaces are built from the computed minimizers.
TOL_PROJECTED_GRADIENT = 1e-10
TOL_SUBGRADIENT = 1e-8
MAX_INNER = 100_000


@dataclass
class ProxResult:
    """Solution of one inner subproblem.

    ``certificate_gap`` is the worst sampled slack of the variational
    optimality inequality (NaN unless certification was requested);
    ``inner_iterations`` counts inner steps, each of which performs one
    projection onto the feasible set.
    """

    minimizer: np.ndarray
    certificate_gap: float = float("nan")
    inner_iterations: int = 1
    converged: bool = True
    diagnostic: str | None = None


def objective(f: Bifunction, w, x, lam: float, y) -> float:
    """The subproblem objective lam*f(w, y) + 0.5*||x - y||^2."""
    return lam * f.value(w, y) + 0.5 * float((x - y) @ (x - y))


def solve_prox(
    f: Bifunction,
    w: np.ndarray,
    x: np.ndarray,
    lam: float,
    set_: FeasibleSet,
    tol: float | None = None,
    max_inner: int = MAX_INNER,
    certify_probes: int = 0,
    rng: np.random.Generator | None = None,
) -> ProxResult:
    """Minimize lam*f(w, .) + 0.5*||x - .||^2 over the feasible set.

    ``tol`` is a displacement tolerance for the iterative routes (defaults
    per route); exact routes ignore it.  When ``certify_probes`` > 0 the
    result carries a sampled optimality certificate.
    """
    if not lam > 0.0:
        raise ValueError("prox step lam must be positive")

    if isinstance(f, ViInducedBifunction):
        y = set_.project(x - lam * f.operator(w))
        result = ProxResult(minimizer=y, inner_iterations=1)
    elif isinstance(f, AffineQuadraticBifunction):
        result = _solve_affine_quadratic(f, w, x, lam, set_, tol, max_inner)
    else:
        result = _solve_blackbox(f, w, x, lam, set_, tol, max_inner)

    if not np.all(np.isfinite(result.minimizer)):
        raise NonFiniteObjective("inner subproblem produced non-finite iterate")
    if certify_probes > 0:
        result.certificate_gap = certify_prox(
            f, w, x, lam, set_, result.minimizer, certify_probes, rng=rng
        )
    return result


def _solve_affine_quadratic(f, w, x, lam, set_, tol, max_inner):
    tol = TOL_PROJECTED_GRADIENT if tol is None else tol
    d = x.size
    diag_q = np.diagonal(f.Q)
    if np.count_nonzero(f.Q - np.diag(diag_q)) == 0 and isinstance(set_, (Box, WholeSpace)):
        # Separable objective: exact coordinatewise solve, then clamp.
        c = f.P @ w + f.q
        denom = 1.0 + 2.0 * lam * diag_q
        if np.any(denom <= 0.0):
            raise NonFiniteObjective("subproblem is not strongly convex (Q too negative)")
        y = (x - lam * c + lam * diag_q * w) / denom
        return ProxResult(minimizer=set_.project(y), inner_iterations=1)

    # Projected gradient with the step 1/L for the gradient's Lipschitz
    # constant L = 1 + lam*||Q + Q^T||; linear convergence from 1-strong
    # convexity.
    lip_grad = 1.0 + lam * f.sym_norm()
    step = 1.0 / lip_grad
    shift = x - lam * (f.P @ w + f.q) + lam * (f.Q.T @ w)
    sym = f.Q + f.Q.T
    y = set_.project(x)
    for it in range(1, max_inner + 1):
        grad = y + lam * (sym @ y) - shift
        y_new = set_.project(y - step * grad)
        if float(np.linalg.norm(y_new - y)) <= tol:
            return ProxResult(minimizer=y_new, inner_iterations=it + 1)
        y = y_new
    return ProxResult(
        minimizer=y,
        inner_iterations=max_inner,
        converged=False,
        diagnostic=f"projected gradient hit {max_inner} iterations",
    )


def _solve_blackbox(f, w, x, lam, set_, tol, max_inner):
    tol = TOL_SUBGRADIENT if tol is None else tol
    y = set_.project(x)
    best = y
    best_res = np.inf
    beta = 1.0
    averaging_from = None
    window: list[float] = []
    for it in range(1, max_inner + 1):
        s = f.subgrad2(w, y)
        target = set_.project(x - lam * s)
        residual = float(np.linalg.norm(target - y))
        if residual < best_res:
            best_res, best = residual, target
        if residual <= tol:
            return ProxResult(minimizer=target, inner_iterations=it + 1)
        if averaging_from is None:
            window.append(residual)
            if len(window) >= 25 and window[-1] > 0.95 * window[0]:
                # No contraction: damp toward a Cesaro-style average.
                averaging_from = it
            window = window[-25:]
        if averaging_from is not None:
            beta = 2.0 / (it - averaging_from + 2.0)
        y = y + beta * (target - y)
        if not np.all(np.isfinite(y)):
            raise NonFiniteObjective("subgradient iteration diverged")
    return ProxResult(
        minimizer=best,
        inner_iterations=max_inner,
        converged=False,
        diagnostic=f"subgradient scheme hit {max_inner} iterations "
        f"(best residual {best_res:.3e})",
    )


def certify_prox(
    f: Bifunction,
    w: np.ndarray,
    x: np.ndarray,
    lam: float,
    set_: FeasibleSet,
    result: np.ndarray,
    probes: int,
    rng: np.random.Generator | None = None,
) -> float:
    """Sampled optimality certificate for a claimed subproblem minimizer.

    Returns the minimum over random probes y in C of

        <result - x, y - result> - lam*(f(w, result) - f(w, y)),

    which is nonnegative at the true minimizer for every y in C.
    """
    if rng is None:
        rng = np.random.default_rng(0)
    Y = np.atleast_2d(set_.sample(rng, probes))
    lhs = (Y - result) @ (result - x)
    gaps = lhs - lam * (f.value(w, result) - f.value_batch(w, Y))
    return float(np.min(gaps))
