"""User-facing quantifications: Lipschitzian metric over a norm ball,
conservative safe-radius certification, targeted robustness, uncertainty
example search, reachability ranges, plus a random-sampling baseline and an
exhaustive grid oracle for desk-scale ground truth.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from . import mads as _mads
from .auglag import AugLagConfig, ConstraintFn, minimize_constrained
from .mads import BoxBounds, MadsConfig, StartPointError
from .network import Network
from .properties import (ConfidenceInterval, ConfigError, PropertyExpr,
                         UncertaintyUniform, kl_from_uniform, label)

__all__ = [
    "NormBall",
    "RiskWitness",
    "QuantReport",
    "CenterAtRiskError",
    "GridSizeError",
    "Certificate",
    "p_norm",
    "objective_w",
    "lipschitz_metric",
    "certify_radius",
    "targeted_robustness",
    "uncertainty_search",
    "ReachResult",
    "reach_range",
    "random_sampling_baseline",
    "grid_oracle",
]

_BALL_TOL = 1e-9  # slack when testing witness membership in an L1/L2 ball


class CenterAtRiskError(ValueError):
    """The center input already violates the property (s(x) < 0)."""


class GridSizeError(ValueError):
    """Grid oracle refused: input dimension too large for exhaustive search."""


def p_norm(diff: np.ndarray, p: float) -> np.ndarray:
    """Row-wise Lp norm for p in {1, 2, inf}."""
    diff = np.atleast_2d(diff)
    if p == 1:
        return np.abs(diff).sum(axis=1)
    if p == 2:
        return np.sqrt((diff * diff).sum(axis=1))
    return np.abs(diff).max(axis=1)


@dataclass(frozen=True)
class NormBall:
    center: np.ndarray
    radius: float
    p: float  # 1, 2, or np.inf

    def __post_init__(self):
        c = np.asarray(self.center, dtype=np.float64)
        if c.ndim != 1:
            raise ConfigError("ball center must be a vector")
        if np.any(c < 0.0) or np.any(c > 1.0):
            raise ConfigError("ball center must lie in the unit hypercube")
        if self.radius <= 0:
            raise ConfigError("ball radius must be positive")
        if self.p not in (1, 2, np.inf):
            raise ConfigError("p must be 1, 2, or inf")
        object.__setattr__(self, "center", c)

    def box(self) -> BoxBounds:
        """The enclosing box: per-coordinate [max(x-d, 0), min(x+d, 1)]."""
        return BoxBounds(np.maximum(self.center - self.radius, 0.0),
                         np.minimum(self.center + self.radius, 1.0))

    def contains(self, pts: np.ndarray, tol: float = _BALL_TOL) -> np.ndarray:
        return p_norm(np.atleast_2d(pts) - self.center, self.p) <= self.radius + tol


@dataclass(frozen=True)
class RiskWitness:
    x: np.ndarray
    s_value: float


@dataclass(frozen=True)
class QuantReport:
    property: PropertyExpr
    ball: NormBall
    Q_estimate: float
    witness: np.ndarray
    s_at_x: float
    safe_radius: float
    radius_clamped: bool
    fevals: int
    batches: int
    method: str
    seed: Optional[int] = None
    risk_found: Optional[RiskWitness] = None
    model_digest: Optional[str] = None
    wall_time_ms: Optional[float] = None


def _safe_radius(s_at_x: float, q: float, d: float) -> tuple[float, bool]:
    """Conservative radius s(x)/Q capped at d; the cap flag reports when the
    cap (or a zero changing rate) decided the answer."""
    if s_at_x < 0:
        return 0.0, False
    if q <= 0.0:
        return d, True
    raw = s_at_x / q
    if raw >= d:
        return d, True
    return raw, False


class _TrackedObjective:
    """Base for batch objectives over a network: counts evaluations, tracks
    the best changing-rate witness and any risk point inside the ball."""

    def __init__(self, net: Network, expr: PropertyExpr, ball: NormBall):
        self.net = net
        self.expr = expr
        self.ball = ball
        self.fevals = 0
        self.batches = 0
        self.s_at_x = float(expr.evaluate(net.forward_single(ball.center)))
        self.fevals += 1
        self.batches += 1
        self.best_ratio = 0.0
        self.best_point: np.ndarray | None = None
        self.min_s = self.s_at_x
        self.min_s_point = ball.center.copy()

    def _track(self, pts: np.ndarray, s_vals: np.ndarray) -> np.ndarray:
        """Update witnesses from one evaluated batch; returns the distances."""
        dist = p_norm(pts - self.ball.center, self.ball.p)
        in_ball = (dist <= self.ball.radius + _BALL_TOL) & (dist > 0.0)
        if np.any(in_ball):
            ratio = np.where(in_ball, np.abs(s_vals - self.s_at_x) / np.where(
                dist > 0, dist, 1.0), -np.inf)
            i = int(np.argmax(ratio))
            if ratio[i] > self.best_ratio:
                self.best_ratio = float(ratio[i])
                self.best_point = pts[i].copy()
            j = int(np.argmin(np.where(in_ball, s_vals, np.inf)))
            if s_vals[j] < self.min_s:
                self.min_s = float(s_vals[j])
                self.min_s_point = pts[j].copy()
        return dist

    def _eval_s(self, pts: np.ndarray) -> np.ndarray:
        outs = self.net.forward(pts)
        self.fevals += pts.shape[0]
        self.batches += 1
        return self.expr.evaluate_many(outs)

    def risk_witness(self) -> Optional[RiskWitness]:
        if self.min_s < 0:
            return RiskWitness(x=self.min_s_point, s_value=self.min_s)
        return None


class _ChangingRateObjective(_TrackedObjective):
    """w(x_hat) = ||x_hat - x||_p / |s(x_hat) - s(x)|, +inf at the center and
    wherever s does not change (a zero changing rate never attains the sup)."""

    def __call__(self, pts: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(pts)
        s_vals = self._eval_s(pts)
        dist = self._track(pts, s_vals)
        ds = np.abs(s_vals - self.s_at_x)
        with np.errstate(divide="ignore", invalid="ignore"):
            w = np.where((ds > 0) & (dist > 0), dist / ds, np.inf)
        return np.where(np.isnan(w), np.inf, w)


def objective_w(net: Network, expr: PropertyExpr, x, p: float,
                radius: float | None = None) -> _ChangingRateObjective:
    """Build the batch objective for the changing-rate minimization; the
    returned callable also tracks the best witness seen so far."""
    x = np.asarray(x, dtype=np.float64)
    ball = NormBall(center=x, radius=radius if radius is not None else 1.0, p=p)
    return _ChangingRateObjective(net, expr, ball)


def _probe_start(obj: _TrackedObjective, ball: NormBall, bounds: BoxBounds,
                 w_of: "_ChangingRateObjective", seed: int) -> np.ndarray | None:
    """Find a point in the ball where the changing-rate objective is finite.

    The objective is undefined at the center, so the optimizer cannot start
    there; probe coordinate offsets first, then random ball points.  Returns
    None when the property appears constant over everything probed.
    """
    n = ball.center.shape[0]
    probes = []
    for frac in (0.5, 0.25):
        step = ball.radius * frac
        eye = np.eye(n) * step
        probes.append(ball.center + eye)
        probes.append(ball.center - eye)
    rng = np.random.default_rng(seed)
    probes.append(_sample_ball(rng, ball, 2 * n + 16))
    pts = bounds.clip(np.concatenate(probes, axis=0))
    inside = ball.contains(pts)
    pts = pts[inside]
    if pts.shape[0] == 0:
        return None
    vals = w_of(pts)
    best = int(np.argmin(vals))
    if not np.isfinite(vals[best]):
        return None
    return pts[best]


def lipschitz_metric(net: Network, expr: PropertyExpr, ball: NormBall,
                     budget: int = 20_000, seed: int = 0,
                     mads_cfg: MadsConfig | None = None,
                     auglag_cfg: AugLagConfig | None = None) -> QuantReport:
    """Estimate the greatest changing rate of the property over the ball.

    The estimate is a lower bound on the true supremum: search can only
    under-estimate it.  Any evaluated in-ball point with s < 0 is surfaced as
    a risk witness.
    """
    n = net.input_dim
    if ball.center.shape[0] != n:
        raise ConfigError(f"ball center has dimension {ball.center.shape[0]}, "
                          f"model expects {n}")
    if budget < 2 * n + 2:
        raise ConfigError(f"budget {budget} is below the poll-set size {2 * n + 1}")

    obj = _ChangingRateObjective(net, expr, ball)
    bounds = ball.box()
    base = mads_cfg or MadsConfig()
    constraint = (None if ball.p == np.inf else
                  ConstraintFn(center=ball.center, radius=ball.radius, p=ball.p))
    # A single descent often converges long before the budget runs out;
    # re-probe and restart from fresh ball points until it is spent.
    restart = 0
    while obj.fevals < budget:
        probe_seed = seed if restart == 0 else seed + 1000 + restart
        start = _probe_start(obj, ball, bounds, obj, probe_seed)
        if start is None or obj.fevals >= budget:
            break
        remaining = budget - obj.fevals
        if ball.p == np.inf:
            cfg = replace(base, max_fun_evals=remaining, seed=seed + restart)
            _mads.minimize(obj, start, bounds, cfg)
        else:
            al = auglag_cfg or AugLagConfig()
            per_sub = max(remaining // al.max_outer, 2 * n + 2)
            al = replace(al, subproblem_evals=per_sub)
            minimize_constrained(obj, constraint, start, al,
                                 replace(base, seed=seed + restart))
        restart += 1

    q = obj.best_ratio
    witness = obj.best_point if obj.best_point is not None else ball.center.copy()
    d_prime, clamped = _safe_radius(obj.s_at_x, q, ball.radius)
    method = "MADS" if ball.p == np.inf else "AugLag+MADS"
    return QuantReport(property=expr, ball=ball, Q_estimate=q, witness=witness,
                       s_at_x=obj.s_at_x, safe_radius=d_prime,
                       radius_clamped=clamped, fevals=obj.fevals,
                       batches=obj.batches, method=method, seed=seed,
                       risk_found=obj.risk_witness())


@dataclass(frozen=True)
class Certificate:
    safe_radius: float
    radius_clamped: bool
    q_provenance: str  # "estimated": Q is a search lower bound, not a proven sup
    method: str


def certify_radius(report: QuantReport) -> tuple[float, Certificate]:
    """Turn a report into a conservative safe radius d' = min(s(x)/Q, d).

    Raises when the center is already at risk; the certificate records that Q
    is an estimate (the radius is sound only against the true supremum).
    """
    if report.s_at_x < 0:
        raise CenterAtRiskError(
            f"center already violates the property (s(x) = {report.s_at_x:.6g}); "
            "safe radius is 0")
    d_prime, clamped = _safe_radius(report.s_at_x, report.Q_estimate,
                                    report.ball.radius)
    provenance = "exhaustive-grid" if report.method == "GridOracle" else "estimated"
    return d_prime, Certificate(safe_radius=d_prime, radius_clamped=clamped,
                                q_provenance=provenance, method=report.method)


def targeted_robustness(net: Network, x, target_label: int, ball_radius: float,
                        p: float, budget: int = 20_000, seed: int = 0,
                        epsilon: float = 0.0) -> QuantReport:
    """Robustness against being pushed into a specific target label: the
    confidence-interval property pairing the current top label with the
    target."""
    x = np.asarray(x, dtype=np.float64)
    out = net.forward_single(x)
    j1 = int(np.argmax(out)) + 1
    if target_label == j1:
        raise ConfigError("target label equals the current top label")
    expr = ConfidenceInterval(l1=j1, l2=target_label, epsilon=epsilon)
    ball = NormBall(center=x, radius=ball_radius, p=p)
    return lipschitz_metric(net, expr, ball, budget=budget, seed=seed)


class _KLObjective:
    """Minimizes KL(uniform || f(x_hat)) over the ball, recording a monotone
    best-so-far trajectory per evaluated batch."""

    def __init__(self, net: Network, ball: NormBall):
        self.net = net
        self.ball = ball
        self.fevals = 0
        self.batches = 0
        self.best_kl = np.inf
        self.best_point = ball.center.copy()
        self.trajectory: list[tuple[int, float]] = []

    def __call__(self, pts: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(pts)
        outs = self.net.forward(pts)
        self.fevals += pts.shape[0]
        self.batches += 1
        m = outs.shape[1]
        clamped = np.maximum(outs, 1e-12)
        kl = -np.log(m * clamped).sum(axis=1) / m
        in_ball = self.ball.contains(pts)
        masked = np.where(in_ball, kl, np.inf)
        i = int(np.argmin(masked))
        if masked[i] < self.best_kl:
            self.best_kl = float(masked[i])
            self.best_point = pts[i].copy()
        self.trajectory.append((self.batches, float(min(self.best_kl, np.inf))))
        return np.where(in_ball, kl, np.inf)


def uncertainty_search(net: Network, x, ball_radius: float, p: float,
                       epsilon: float, budget: int = 20_000, seed: int = 0,
                       epsilon_label: float = 0.1):
    """Hunt for inputs where the output is near-uniform (decision-boundary
    intersections) by minimizing the KL divergence from uniform over the ball.

    Returns the report plus the incumbent (batch, best-KL) trajectory, which
    is non-increasing by construction.  An uncertainty example is declared
    when the best point has KL < epsilon and the labelling rule abstains.
    """
    x = np.asarray(x, dtype=np.float64)
    ball = NormBall(center=x, radius=ball_radius, p=p)
    expr = UncertaintyUniform(epsilon=epsilon)
    n = net.input_dim
    if budget < 2 * n + 2:
        raise ConfigError(f"budget {budget} is below the poll-set size {2 * n + 1}")

    obj = _KLObjective(net, ball)
    s_at_x = float(expr.evaluate(net.forward_single(x)))
    obj.fevals += 1
    obj.batches += 1
    cfg = MadsConfig(max_fun_evals=budget - obj.fevals, seed=seed)
    if p == np.inf:
        _mads.minimize(obj, x, ball.box(), cfg)
    else:
        al = AugLagConfig()
        al = replace(al, subproblem_evals=max((budget - obj.fevals) // al.max_outer,
                                              2 * n + 2))
        constraint = ConstraintFn(center=x, radius=ball_radius, p=p)
        minimize_constrained(obj, constraint, x, al, cfg)

    witness = obj.best_point
    s_wit = float(obj.best_kl - epsilon)
    dist = float(p_norm((witness - x)[None, :], p)[0])
    q = abs(s_wit - s_at_x) / dist if dist > 0 else 0.0
    risk = None
    if obj.best_kl < epsilon:
        dec = label(net.forward_single(witness), epsilon_label)
        obj.fevals += 1
        obj.batches += 1
        if dec.label == 0:
            risk = RiskWitness(x=witness, s_value=s_wit)
    d_prime, clamp = _safe_radius(s_at_x, q, ball_radius)
    report = QuantReport(property=expr, ball=ball, Q_estimate=q, witness=witness,
                         s_at_x=s_at_x, safe_radius=d_prime, radius_clamped=clamp,
                         fevals=obj.fevals, batches=obj.batches,
                         method="MADS" if p == np.inf else "AugLag+MADS",
                         seed=seed, risk_found=risk)
    return report, list(obj.trajectory)


@dataclass(frozen=True)
class ReachResult:
    max_value: float
    witness: np.ndarray
    reachable: bool
    value_at_center: float
    epsilon: float
    fevals: int
    batches: int


class _NegProbObjective:
    """Minimizes -f_l over the ball (maximizes label l's probability)."""

    def __init__(self, net: Network, lab: int, ball: NormBall):
        self.net = net
        self.lab = lab
        self.ball = ball
        self.fevals = 0
        self.batches = 0
        self.best = -np.inf
        self.best_point = ball.center.copy()

    def __call__(self, pts: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(pts)
        outs = self.net.forward(pts)
        self.fevals += pts.shape[0]
        self.batches += 1
        vals = outs[:, self.lab - 1]
        in_ball = self.ball.contains(pts)
        masked = np.where(in_ball, vals, -np.inf)
        i = int(np.argmax(masked))
        if masked[i] > self.best:
            self.best = float(masked[i])
            self.best_point = pts[i].copy()
        return np.where(in_ball, -vals, np.inf)


def reach_range(net: Network, x, lab: int, ball_radius: float, p: float,
                epsilon: float, budget: int = 10_000, seed: int = 0) -> ReachResult:
    """Estimate the maximum of f_l over the ball and flag whether it reaches
    f_l(x) + epsilon."""
    x = np.asarray(x, dtype=np.float64)
    if lab < 1 or lab > net.output_dim:
        raise ConfigError(f"label {lab} out of range 1..{net.output_dim}")
    ball = NormBall(center=x, radius=ball_radius, p=p)
    n = net.input_dim
    if budget < 2 * n + 2:
        raise ConfigError(f"budget {budget} is below the poll-set size {2 * n + 1}")
    obj = _NegProbObjective(net, lab, ball)
    f_center = float(net.forward_single(x)[lab - 1])
    obj.fevals += 1
    obj.batches += 1
    cfg = MadsConfig(max_fun_evals=budget - obj.fevals, seed=seed)
    if p == np.inf:
        _mads.minimize(obj, x, ball.box(), cfg)
    else:
        al = AugLagConfig()
        al = replace(al, subproblem_evals=max((budget - obj.fevals) // al.max_outer,
                                              2 * n + 2))
        minimize_constrained(obj, ConstraintFn(center=x, radius=ball_radius, p=p),
                             x, al, cfg)
    return ReachResult(max_value=obj.best, witness=obj.best_point,
                       reachable=obj.best >= f_center + epsilon,
                       value_at_center=f_center, epsilon=epsilon,
                       fevals=obj.fevals, batches=obj.batches)


def _sample_ball(rng: np.random.Generator, ball: NormBall, count: int) -> np.ndarray:
    """Uniform samples from the ball, clipped to the unit box.  Clipping a
    coordinate toward [0,1] never increases its distance from the in-box
    center, so clipped points stay inside the ball."""
    n = ball.center.shape[0]
    if ball.p == np.inf:
        box = ball.box()
        return rng.uniform(box.lower, box.upper, size=(count, n))
    if ball.p == 2:
        g = rng.standard_normal((count, n))
        dirs = g / np.linalg.norm(g, axis=1, keepdims=True)
    else:
        g = rng.exponential(size=(count, n)) * rng.choice([-1.0, 1.0], size=(count, n))
        dirs = g / np.abs(g).sum(axis=1, keepdims=True)
    radii = ball.radius * rng.uniform(size=(count, 1)) ** (1.0 / n)
    return np.clip(ball.center + radii * dirs, 0.0, 1.0)


def random_sampling_baseline(net: Network, expr: PropertyExpr, ball: NormBall,
                             sample_count: int, seed: int = 0,
                             batch_size: int = 4096) -> QuantReport:
    """Uniform-sampling baseline: the max observed changing rate over
    sample_count random ball points."""
    if sample_count < 1:
        raise ConfigError("sample_count must be >= 1")
    obj = _ChangingRateObjective(net, expr, ball)
    rng = np.random.default_rng(seed)
    remaining = sample_count
    while remaining > 0:
        k = min(batch_size, remaining)
        obj(_sample_ball(rng, ball, k))
        remaining -= k
    q = obj.best_ratio
    witness = obj.best_point if obj.best_point is not None else ball.center.copy()
    d_prime, clamped = _safe_radius(obj.s_at_x, q, ball.radius)
    return QuantReport(property=expr, ball=ball, Q_estimate=q, witness=witness,
                       s_at_x=obj.s_at_x, safe_radius=d_prime,
                       radius_clamped=clamped, fevals=obj.fevals,
                       batches=obj.batches, method="RandomSampling", seed=seed,
                       risk_found=obj.risk_witness())


def grid_oracle(net: Network, expr: PropertyExpr, ball: NormBall,
                points_per_dim: int, max_dim: int = 4,
                chunk: int = 65_536) -> QuantReport:
    """Exhaustive evaluation over a regular grid of the ball's enclosing box;
    desk-scale ground truth for the Lipschitzian metric.  Refuses inputs with
    more than max_dim dimensions (the grid explodes combinatorially)."""
    n = net.input_dim
    if n > max_dim:
        raise GridSizeError(
            f"grid oracle supports at most {max_dim} input dimensions, got {n}")
    if points_per_dim < 2:
        raise ConfigError("points_per_dim must be >= 2")
    box = ball.box()
    axes = [np.linspace(box.lower[i], box.upper[i], points_per_dim)
            for i in range(n)]
    mesh = np.meshgrid(*axes, indexing="ij")
    pts = np.stack([m.ravel() for m in mesh], axis=1)
    if ball.p != np.inf:
        pts = pts[ball.contains(pts)]
    obj = _ChangingRateObjective(net, expr, ball)
    for i in range(0, pts.shape[0], chunk):
        obj(pts[i:i + chunk])
    q = obj.best_ratio
    witness = obj.best_point if obj.best_point is not None else ball.center.copy()
    d_prime, clamped = _safe_radius(obj.s_at_x, q, ball.radius)
    return QuantReport(property=expr, ball=ball, Q_estimate=q, witness=witness,
                       s_at_x=obj.s_at_x, safe_radius=d_prime,
                       radius_clamped=clamped, fevals=obj.fevals,
                       batches=obj.batches, method="GridOracle", seed=None,
                       risk_found=obj.risk_witness())
