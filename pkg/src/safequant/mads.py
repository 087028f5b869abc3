"""Batched mesh adaptive direct search over a box.

Each iteration evaluates one SEARCH batch of mesh points and, if that fails to
improve the incumbent, one POLL batch of positive-spanning directions.  Both
candidate sets are scored through a single call to the batch objective, which
is the CPU analogue of stacking candidates into a tensor for one device pass.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

__all__ = [
    "StartPointError",
    "BoxBounds",
    "MadsConfig",
    "MadsState",
    "MadsResult",
    "BatchObjective",
    "search_stage",
    "poll_stage",
    "minimize",
]

# Contract: maps an array of candidate points (k, n) to (k,) objective values;
# infeasible or undefined candidates come back as +inf, never NaN.
BatchObjective = Callable[[np.ndarray], np.ndarray]


class StartPointError(ValueError):
    """The starting point's objective value is not finite."""


@dataclass(frozen=True)
class BoxBounds:
    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lo = np.asarray(self.lower, dtype=np.float64)
        hi = np.asarray(self.upper, dtype=np.float64)
        if lo.shape != hi.shape or lo.ndim != 1:
            raise ValueError("bounds must be two vectors of equal length")
        if np.any(lo > hi):
            raise ValueError("lower bound exceeds upper bound")
        if np.any(lo < 0.0) or np.any(hi > 1.0):
            raise ValueError("bounds must lie within the unit hypercube")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @classmethod
    def unit(cls, n: int) -> "BoxBounds":
        return cls(np.zeros(n), np.ones(n))

    def contains(self, x: np.ndarray, tol: float = 0.0) -> bool:
        return bool(np.all(x >= self.lower - tol) and np.all(x <= self.upper + tol))

    def clip(self, pts: np.ndarray) -> np.ndarray:
        return np.clip(pts, self.lower, self.upper)


@dataclass(frozen=True)
class MadsConfig:
    initial_mesh_size: float = 2.0 ** -10
    initial_poll_size: float = 1.0
    expansion: float = 2.0          # tau; success multiplies, failure divides
    max_fun_evals: int = 20_000
    min_poll_size: float = 1e-6
    search_points: int | None = None  # default max(2n, 32)
    seed: int = 0

    def __post_init__(self):
        if self.initial_mesh_size > self.initial_poll_size:
            raise ValueError("initial mesh size must not exceed poll size")
        if self.expansion <= 1.0:
            raise ValueError("expansion factor must be > 1")
        if self.max_fun_evals < 1:
            raise ValueError("max_fun_evals must be >= 1")

    def n_search(self, n: int) -> int:
        return self.search_points if self.search_points else max(2 * n, 32)


@dataclass
class MadsState:
    incumbent: np.ndarray
    value: float
    mesh_size: float
    poll_size: float
    iteration: int = 0
    fevals: int = 0
    batches: int = 0
    trace: list[tuple[int, float, float]] = field(default_factory=list)


@dataclass(frozen=True)
class MadsResult:
    x: np.ndarray
    value: float
    trace: tuple[tuple[int, float, float], ...]
    fevals: int
    batches: int
    poll_collapsed: bool  # stopped because the poll size underflowed


def _snap_to_mesh(pts: np.ndarray, center: np.ndarray, mesh: float) -> np.ndarray:
    """Round clipped points back onto the mesh, stepping toward the center so
    the result stays inside any box that contains both center and point."""
    steps = (pts - center) / mesh
    snapped = np.sign(steps) * np.floor(np.abs(steps))
    return center + mesh * snapped


def _evaluate(state: MadsState, obj: BatchObjective, pts: np.ndarray) -> np.ndarray:
    vals = np.asarray(obj(pts), dtype=np.float64)
    vals = np.where(np.isnan(vals), np.inf, vals)
    state.fevals += pts.shape[0]
    state.batches += 1
    return vals


def search_stage(state: MadsState, obj: BatchObjective, bounds: BoxBounds,
                 rng: np.random.Generator, n_points: int):
    """Evaluate one batch of randomly drawn mesh points around the incumbent.

    Each candidate steps z mesh cells along one signed coordinate direction,
    z drawn from {1, ..., poll_size/mesh_size}.
    """
    n = state.incumbent.shape[0]
    z_max = max(int(state.poll_size / state.mesh_size), 1)
    cols = rng.integers(0, 2 * n, size=n_points)
    z = rng.integers(1, z_max + 1, size=n_points)
    pts = np.tile(state.incumbent, (n_points, 1))
    axis = cols % n
    sign = np.where(cols < n, 1.0, -1.0)
    pts[np.arange(n_points), axis] += state.mesh_size * z * sign
    pts = _snap_to_mesh(bounds.clip(pts), state.incumbent, state.mesh_size)
    vals = _evaluate(state, obj, pts)
    best = int(np.argmin(vals))
    success = bool(vals[best] < state.value)
    return success, pts[best], float(vals[best])


def poll_stage(state: MadsState, obj: BatchObjective, bounds: BoxBounds,
               rng: np.random.Generator):
    """Evaluate the poll set: a randomized orthonormal basis completed to a
    maximal positive basis (2n directions), scaled by the poll size."""
    n = state.incumbent.shape[0]
    q, r = np.linalg.qr(rng.standard_normal((n, n)))
    q = q * np.sign(np.diag(r))  # deterministic orientation
    dirs = np.concatenate([q.T, -q.T], axis=0)  # rows are unit directions
    pts = bounds.clip(state.incumbent + state.poll_size * dirs)
    vals = _evaluate(state, obj, pts)
    best = int(np.argmin(vals))
    success = bool(vals[best] < state.value)
    return success, pts[best], float(vals[best])


def minimize(obj: BatchObjective, x0, bounds: BoxBounds,
             cfg: MadsConfig = MadsConfig()) -> MadsResult:
    """Run MADS until the evaluation budget is spent or the poll size
    underflows.  Returns the best evaluated point."""
    x0 = np.asarray(x0, dtype=np.float64)
    if not bounds.contains(x0):
        raise StartPointError("starting point lies outside the bounds")
    state = MadsState(incumbent=x0.copy(), value=np.inf,
                      mesh_size=cfg.initial_mesh_size,
                      poll_size=cfg.initial_poll_size)
    v0 = _evaluate(state, obj, x0[None, :])[0]
    if not np.isfinite(v0):
        raise StartPointError("objective is not finite at the starting point")
    state.value = float(v0)
    rng = np.random.default_rng(cfg.seed)
    n = x0.shape[0]
    n_search = cfg.n_search(n)
    state.trace.append((0, state.value, state.poll_size))

    while state.fevals < cfg.max_fun_evals and state.poll_size >= cfg.min_poll_size:
        s_ok, s_x, s_v = search_stage(state, obj, bounds, rng, n_search)
        p_ok = False
        if s_ok:
            state.incumbent, state.value = s_x, s_v
        else:
            p_ok, p_x, p_v = poll_stage(state, obj, bounds, rng)
            if p_ok:
                state.incumbent, state.value = p_x, p_v
        if s_ok or p_ok:
            if p_ok:
                state.mesh_size *= cfg.expansion
                state.poll_size *= cfg.expansion
        else:
            state.mesh_size /= cfg.expansion
            state.poll_size /= cfg.expansion
        state.iteration += 1
        state.trace.append((state.iteration, state.value, state.poll_size))

    return MadsResult(x=state.incumbent, value=state.value,
                      trace=tuple(state.trace), fevals=state.fevals,
                      batches=state.batches,
                      poll_collapsed=state.poll_size < cfg.min_poll_size)
