"""Run outcomes, per-iteration trace records, and counters."""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, field

import numpy as np

STOP_TOLERANCE = "tolerance"
STOP_MAX_OUTER = "max_outer"
STOP_ERROR = "error"

TRACE_HEADER = (
    "n",
    "step_norm",
    "residual",
    "eps_min",
    "eps_max",
    "dist_to_known",
    "wall_ms",
)


@dataclass
class IterationRecord:
    """One outer iteration: displacement, residual, correction-term range,
    distance to the known limit (NaN when no oracle), and wall time."""

    n: int
    step_norm: float
    residual: float
    eps_min: float
    eps_max: float
    dist_to_known: float
    wall_ms: float
    degenerate_cuts: int = 0
    selected_index: int | None = None

    def csv_row(self) -> str:
        dist = "" if math.isnan(self.dist_to_known) else f"{self.dist_to_known:.17g}"
        return (
            f"{self.n},{self.step_norm:.17g},{self.residual:.17g},"
            f"{self.eps_min:.17g},{self.eps_max:.17g},{dist},{self.wall_ms:.6g}"
        )


@dataclass
class RunCounters:
    """Work counters: subproblem solves and projections onto the feasible set."""

    prox_solves: int = 0
    set_projections: int = 0


@dataclass
class SolverOutcome:
    """Result of one solver run.

    ``invariant_violations`` counts failed per-iteration checks (all zero on
    an accepted run); ``min_prox_certificate`` is the worst sampled
    optimality gap over all inner solves (NaN when certification was off).
    """

    algorithm: str
    final_x: np.ndarray
    stop_reason: str
    iterations: int
    trace: list[IterationRecord]
    invariant_violations: dict[str, int]
    counters: RunCounters = field(default_factory=RunCounters)
    min_prox_certificate: float = float("nan")
    error: str | None = None
    iterates: list[np.ndarray] | None = None

    @property
    def total_violations(self) -> int:
        return sum(self.invariant_violations.values())

    def final_dist_to_known(self) -> float:
        if not self.trace:
            return float("nan")
        return self.trace[-1].dist_to_known


def write_trace(path: str, trace: list[IterationRecord]) -> None:
    """Write the fixed-header comma-separated trace."""
    parent = os.path.dirname(path)
    if parent:
        os.makedirs(parent, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(",".join(TRACE_HEADER) + "\n")
        for record in trace:
            fh.write(record.csv_row() + "\n")
