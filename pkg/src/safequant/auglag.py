"""Augmented-Lagrangian outer loop for norm-ball constrained search.

The L1/L2 ball constraint c(x) = ||x - x0||_p - d <= 0 is folded into the
objective with a shifted logarithmic barrier, giving a sequence of box-only
sub-problems handed to the MADS solver.

Note on the barrier sign: with c <= 0 encoding feasibility, the merit term
must blow up as c approaches the shift q from below and reward decreasing c,
so the merit used here is w - lambda * q * log(q - c), defined for c < q.
(The classical shifted barrier is stated for constraints written as
"g(x) >= 0"; substituting g = -c yields this form.)
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .mads import BatchObjective, BoxBounds, MadsConfig, MadsResult, minimize

__all__ = [
    "InfeasibleStartError",
    "AugLagConfig",
    "ConstraintFn",
    "merit",
    "ConstrainedResult",
    "minimize_constrained",
]


class InfeasibleStartError(ValueError):
    """The starting point violates the norm constraint."""


@dataclass(frozen=True)
class AugLagConfig:
    initial_lambda: float = 1.0
    initial_shift: float = 1.0
    growth: float = 10.0            # multiplier applied to lambda on infeasible outers
    tol: float = 1e-4               # constraint feasibility tolerance
    max_outer: int = 12
    subproblem_evals: int = 4000

    def __post_init__(self):
        if min(self.initial_lambda, self.initial_shift, self.tol) <= 0:
            raise ValueError("lambda, shift, and tolerance must be positive")
        if self.growth <= 1.0:
            raise ValueError("growth factor must be > 1")
        if self.max_outer < 1 or self.subproblem_evals < 1:
            raise ValueError("iteration and evaluation budgets must be >= 1")


@dataclass(frozen=True)
class ConstraintFn:
    """c(x) = ||x - center||_p - radius, batched; feasible iff c <= 0."""

    center: np.ndarray
    radius: float
    p: float  # 1 or 2

    def __post_init__(self):
        c = np.asarray(self.center, dtype=np.float64)
        if self.radius <= 0:
            raise ValueError("radius must be positive")
        if self.p not in (1, 2):
            raise ValueError("constraint norm order must be 1 or 2")
        object.__setattr__(self, "center", c)

    def __call__(self, pts: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(pts)
        diff = pts - self.center
        if self.p == 1:
            dist = np.abs(diff).sum(axis=1)
        else:
            dist = np.sqrt((diff * diff).sum(axis=1))
        return dist - self.radius


def merit(w_val, c_val, lam: float, q: float):
    """Shifted-log-barrier merit; +inf outside the barrier domain c < q."""
    w_val = np.asarray(w_val, dtype=np.float64)
    c_val = np.asarray(c_val, dtype=np.float64)
    gap = q - c_val
    with np.errstate(invalid="ignore", divide="ignore"):
        out = np.where(gap > 0, w_val - lam * q * np.log(np.maximum(gap, 1e-300)),
                       np.inf)
    out = np.where(np.isnan(out), np.inf, out)
    if out.ndim == 0:
        return float(out)
    return out


@dataclass(frozen=True)
class ConstrainedResult:
    x: np.ndarray
    value: float           # raw objective w at x
    feasible: bool
    constraint_value: float
    fevals: int
    batches: int
    outer_iterations: int
    trace: tuple[tuple[int, float, float, float], ...] = field(default_factory=tuple)


class _Recorder:
    """Wraps the raw objective into a merit objective while remembering the
    best feasible and least-infeasible points ever evaluated."""

    def __init__(self, obj: BatchObjective, constraint: ConstraintFn, tol: float):
        self.obj = obj
        self.constraint = constraint
        self.tol = tol
        self.best_feasible: tuple[np.ndarray, float, float] | None = None
        self.least_infeasible: tuple[np.ndarray, float, float] | None = None
        self.lam = 1.0
        self.q = 1.0

    def __call__(self, pts: np.ndarray) -> np.ndarray:
        w = np.asarray(self.obj(pts), dtype=np.float64)
        c = self.constraint(pts)
        feas = c <= self.tol
        finite = np.isfinite(w)
        ok = feas & finite
        if np.any(ok):
            i = int(np.argmin(np.where(ok, w, np.inf)))
            if self.best_feasible is None or w[i] < self.best_feasible[1]:
                self.best_feasible = (pts[i].copy(), float(w[i]), float(c[i]))
        bad = ~feas & finite
        if np.any(bad):
            i = int(np.argmin(np.where(bad, c, np.inf)))
            if self.least_infeasible is None or c[i] < self.least_infeasible[2]:
                self.least_infeasible = (pts[i].copy(), float(w[i]), float(c[i]))
        return merit(w, c, self.lam, self.q)


def minimize_constrained(obj: BatchObjective, constraint: ConstraintFn, x0,
                         cfg: AugLagConfig = AugLagConfig(),
                         mads_cfg: MadsConfig = MadsConfig()) -> ConstrainedResult:
    """Solve min w(x) subject to the norm constraint and the unit box.

    Sub-problems are warm-started from the best feasible point so far with a
    halved initial poll size per outer iteration; lambda grows when a
    sub-solution stays infeasible and the shift q halves every outer round.
    """
    x0 = np.asarray(x0, dtype=np.float64)
    if float(constraint(x0[None, :])[0]) >= 0:
        raise InfeasibleStartError("starting point must be strictly feasible")
    if np.any(x0 < 0) or np.any(x0 > 1):
        raise InfeasibleStartError("starting point must lie in the unit box")

    n = x0.shape[0]
    bounds = BoxBounds.unit(n)
    rec = _Recorder(obj, constraint, cfg.tol)
    lam = cfg.initial_lambda
    q = cfg.initial_shift
    fevals = batches = 0
    trace: list[tuple[int, float, float, float]] = []
    outer = 0
    for outer in range(cfg.max_outer):
        rec.lam, rec.q = lam, q
        start = rec.best_feasible[0] if rec.best_feasible is not None else x0
        sub_cfg = replace(
            mads_cfg,
            initial_poll_size=mads_cfg.initial_poll_size / 2 ** outer,
            initial_mesh_size=min(mads_cfg.initial_mesh_size,
                                  mads_cfg.initial_poll_size / 2 ** outer),
            max_fun_evals=cfg.subproblem_evals,
            seed=mads_cfg.seed + outer,
        )
        try:
            sub = minimize(rec, start, bounds, sub_cfg)
        except Exception:
            # Warm start fell outside the shrinking barrier domain; restart
            # from the ball center next round.
            rec.best_feasible = None
            lam *= cfg.growth
            q /= 2.0
            continue
        fevals += sub.fevals
        batches += sub.batches
        c_sub = float(constraint(sub.x[None, :])[0])
        trace.append((outer, sub.value, c_sub, lam))
        feasible_now = c_sub <= cfg.tol
        if not feasible_now:
            lam *= cfg.growth
        q /= 2.0
        if sub.poll_collapsed and feasible_now and q <= 1e-3:
            break

    if rec.best_feasible is not None:
        x, w, c = rec.best_feasible
        return ConstrainedResult(x=x, value=w, feasible=True, constraint_value=c,
                                 fevals=fevals, batches=batches,
                                 outer_iterations=outer + 1, trace=tuple(trace))
    if rec.least_infeasible is not None:
        x, w, c = rec.least_infeasible
        return ConstrainedResult(x=x, value=w, feasible=False, constraint_value=c,
                                 fevals=fevals, batches=batches,
                                 outer_iterations=outer + 1, trace=tuple(trace))
    # Nothing finite was ever seen; report the start point as infeasible-best.
    return ConstrainedResult(x=x0, value=math.inf, feasible=False,
                             constraint_value=float(constraint(x0[None, :])[0]),
                             fevals=fevals, batches=batches,
                             outer_iterations=outer + 1, trace=tuple(trace))
