"""End-to-end acceptance gate.

Each test covers one numbered release criterion and prints a single
pass/fail line (visible with pytest -s); the assertions carry the same
condition so the suite fails loudly when a criterion does not hold.
"""

import math
import time

import numpy as np
import pytest

from safequant.auglag import AugLagConfig, ConstraintFn, minimize_constrained
from safequant.mads import BoxBounds, MadsConfig, minimize
from safequant.modelio import report_from_dict, report_to_dict
from safequant.network import Softmax
from safequant.properties import classify_risk, label, make_ci_case
from safequant.quantify import (NormBall, grid_oracle, lipschitz_metric,
                                p_norm, random_sampling_baseline, reach_range,
                                uncertainty_search)

from conftest import (fixture_nets_2d, make_seed0_net, make_triple_point_net)

CENTER = np.array([0.4, 0.55])
RADII = (0.1, 0.2, 0.4)


def _announce(num: int, desc: str, ok: bool, detail: str = "") -> None:
    tag = "PASS" if ok else "FAIL"
    extra = f" ({detail})" if detail else ""
    print(f"criterion {num} [{desc}]: {tag}{extra}")


@pytest.fixture(scope="module")
def fixtures():
    return fixture_nets_2d()


@pytest.fixture(scope="module")
def grid_reports(fixtures):
    """Grid-oracle ground truth per (net, d) case at 401 points per dim."""
    out = {}
    for name, net in fixtures:
        expr = make_ci_case(1, net.forward_single(CENTER))
        for d in RADII:
            ball = NormBall(CENTER, d, np.inf)
            out[(name, d)] = (expr, grid_oracle(net, expr, ball, 401))
    return out


def test_criterion_1_grid_oracle_agreement(fixtures, grid_reports):
    failures = []
    for name, net in fixtures:
        for d in RADII:
            expr, truth = grid_reports[(name, d)]
            started = time.perf_counter()
            est = lipschitz_metric(net, expr, NormBall(CENTER, d, np.inf),
                                   budget=20_000, seed=0)
            elapsed = time.perf_counter() - started
            if truth.Q_estimate == 0.0:
                # Constant property over the ball: the search must agree.
                rel = 0.0 if est.Q_estimate == 0.0 else np.inf
            else:
                rel = abs(est.Q_estimate - truth.Q_estimate) / truth.Q_estimate
            if rel > 0.05 or elapsed > 30.0:
                failures.append((name, d, rel, elapsed))
    ok = not failures
    _announce(1, "grid-oracle agreement within 5% at 20k budget", ok,
              f"{18 - len(failures)}/18 cases" + (f", worst {failures}" if failures else ""))
    assert ok, failures


def test_criterion_2_safe_radius_soundness(fixtures, grid_reports):
    failures = []
    for name, net in fixtures:
        for d in RADII:
            expr, truth = grid_reports[(name, d)]
            s_x = truth.s_at_x
            assert s_x >= 0  # case-1 interval at the center is nonnegative
            q = truth.Q_estimate
            d_prime = d if q == 0 else min(s_x / q, d)
            if d_prime == 0:
                continue
            box = NormBall(CENTER, d_prime, np.inf).box()
            axes = [np.linspace(box.lower[i], box.upper[i], 801) for i in (0, 1)]
            mesh = np.meshgrid(*axes, indexing="ij")
            pts = np.stack([m.ravel() for m in mesh], axis=1)
            s_vals = expr.evaluate_many(net.forward(pts))
            bad = int(np.sum(s_vals < 0))
            if bad:
                failures.append((name, d, d_prime, bad))
    ok = not failures
    _announce(2, "certified radius has no risk point on the 801-grid", ok,
              str(failures) if failures else "18/18 cases")
    assert ok, failures


def test_criterion_3_reachability_protocol(fixtures):
    center = np.array([0.45, 0.5])
    d = 0.2
    cases = [(name, net, lab) for name, net in fixtures for lab in (1, 2)][:10]
    hits = 0
    details = []
    box = NormBall(center, d, np.inf).box()
    axes = [np.linspace(box.lower[i], box.upper[i], 401) for i in (0, 1)]
    mesh = np.meshgrid(*axes, indexing="ij")
    pts = np.stack([m.ravel() for m in mesh], axis=1)
    for name, net, lab in cases:
        truth = float(net.forward(pts)[:, lab - 1].max())
        res = reach_range(net, center, lab, d, np.inf, epsilon=0.01,
                          budget=10_000, seed=0)
        err = abs(res.max_value - truth)
        if err <= 1e-2:
            hits += 1
        else:
            details.append((name, lab, err))
    ok = hits >= 9
    _announce(3, "reach_range within 1e-2 of grid max on >= 9/10 cases", ok,
              f"{hits}/10" + (f", misses {details}" if details else ""))
    assert ok, details


def test_criterion_4_mads_beats_random_sampling(fixtures):
    centers = [np.array(c) for c in
               [(0.3, 0.7), (0.5, 0.5), (0.7, 0.3), (0.35, 0.6), (0.6, 0.4),
                (0.45, 0.55), (0.25, 0.45), (0.55, 0.65), (0.65, 0.5),
                (0.4, 0.3)]]
    inputs = [(fixtures[i % len(fixtures)][1], centers[i]) for i in range(10)]
    d = 0.2
    shortfalls = {}
    for p in (1, 2, np.inf):
        for budget in (2_000, 10_000):
            wins = 0
            for net, center in inputs:
                expr = make_ci_case(1, net.forward_single(center))
                ball = NormBall(center, d, p)
                mads_q = lipschitz_metric(net, expr, ball, budget=budget,
                                          seed=3).Q_estimate
                rs_q = random_sampling_baseline(net, expr, ball, budget,
                                                seed=3).Q_estimate
                wins += mads_q >= rs_q
            if wins < 8:
                shortfalls[(p, budget)] = wins
    ok = not shortfalls
    _announce(4, "MADS Q >= RS Q on >= 8/10 inputs per (p, budget)", ok,
              str(shortfalls) if shortfalls else "all 6 settings")
    assert ok, shortfalls


def test_criterion_5_batching_economy():
    n = 100
    target = np.full(n, 0.45)
    obj = lambda pts: ((pts - target) ** 2).sum(axis=1)
    cfg = MadsConfig(max_fun_evals=10_000, seed=0)
    res = minimize(obj, np.full(n, 0.5), BoxBounds.unit(n), cfg)
    ratio = res.fevals / res.batches
    bound = (cfg.n_search(n) + (n + 1)) / 2  # non-opportunistic: full factor
    ok = ratio >= bound
    _announce(5, "fevals per batch >= (n_k + n + 1)/2 at n=100", ok,
              f"ratio {ratio:.1f} vs bound {bound:.1f}")
    assert ok, (ratio, bound)


def test_criterion_6_constrained_analytic_optima():
    checks = []

    con = ConstraintFn(np.array([0.5, 0.5]), 0.3, p=1)
    res = minimize_constrained(lambda pts: -pts[:, 0], con, [0.5, 0.5],
                               AugLagConfig(subproblem_evals=4000),
                               MadsConfig(seed=0))
    err1 = float(np.max(np.abs(res.x - [0.8, 0.5])))
    checks.append(("linear/L1", err1, res.fevals))

    con = ConstraintFn(np.array([0.5, 0.5]), 0.25, p=2)
    quad = lambda pts: ((pts - 1.0) ** 2).sum(axis=1)
    res = minimize_constrained(quad, con, [0.5, 0.5],
                               AugLagConfig(subproblem_evals=4000),
                               MadsConfig(seed=0))
    opt = 0.5 + 0.25 / math.sqrt(2)
    err2 = float(np.max(np.abs(res.x - [opt, opt])))
    checks.append(("quadratic/L2", err2, res.fevals))

    ok = all(err <= 1e-2 and fe <= 50_000 for _, err, fe in checks)
    _announce(6, "analytic L1/L2 optima within 1e-2 at <= 50k fevals", ok,
              "; ".join(f"{n}: err {e:.2e}, {f} fevals" for n, e, f in checks))
    assert ok, checks


def test_criterion_7_uncertainty_example_search():
    net = make_triple_point_net()
    report, trajectory = uncertainty_search(net, np.array([0.55, 0.45]),
                                            ball_radius=0.4, p=2,
                                            epsilon=0.01, budget=10_000, seed=0)
    kls = [kl for _, kl in trajectory]
    monotone = all(b <= a for a, b in zip(kls, kls[1:]))
    found = report.risk_found is not None
    abstains = found and label(net.forward_single(report.risk_found.x),
                               0.1).label == 0
    ok = found and abstains and monotone and kls[-1] < 0.01
    _announce(7, "uncertainty example with KL < 0.01 and abstaining label", ok,
              f"final KL {kls[-1]:.2e}, monotone={monotone}")
    assert ok, (found, monotone, kls[-1])


def test_criterion_8_invariant_suites():
    rng = np.random.default_rng(2024)
    suites = {}

    # Batch consistency: batched evaluation is bit-identical to row-by-row.
    net = make_seed0_net()
    ok = True
    for _ in range(1000):
        pts = rng.uniform(size=(int(rng.integers(2, 6)), 2))
        full = net.forward(pts)
        rows = np.stack([net.forward_single(p) for p in pts])
        ok &= np.array_equal(full, rows)
    suites["batch-consistency"] = ok

    # Softmax rows are probability vectors.
    sm = Softmax()
    logits = rng.normal(scale=20, size=(1000, 7))
    out = sm.apply(logits)
    suites["softmax-normalization"] = bool(
        np.all(out >= 0) and np.allclose(out.sum(axis=1), 1.0, atol=1e-12))

    # Mesh/poll coupling: configs accepted exactly when mesh <= poll.
    ok = True
    for _ in range(1000):
        mesh, poll = rng.uniform(1e-6, 2.0, size=2)
        try:
            MadsConfig(initial_mesh_size=mesh, initial_poll_size=poll)
            accepted = True
        except ValueError:
            accepted = False
        ok &= accepted == (mesh <= poll)
    suites["mesh-poll-coupling"] = ok

    # Witness containment and report recomputability on random runs.
    in_ball = recompute = True
    for i in range(1000):
        center = rng.uniform(0.1, 0.9, size=2)
        d = float(rng.uniform(0.05, 0.3))
        p = [1, 2, np.inf][i % 3]
        ball = NormBall(center, d, p)
        expr = make_ci_case(1, net.forward_single(center))
        rep = random_sampling_baseline(net, expr, ball, 16, seed=i)
        in_ball &= bool(ball.contains(rep.witness[None, :])[0])
        in_ball &= bool(np.all(rep.witness >= 0) and np.all(rep.witness <= 1))
        back = report_from_dict(report_to_dict(rep))
        dist = float(p_norm((back.witness - center)[None, :], p)[0])
        if dist > 0:
            s_w = float(expr.evaluate(net.forward_single(back.witness)))
            recompute &= abs(abs(s_w - back.s_at_x) / dist
                             - back.Q_estimate) <= 1e-9
    suites["witness-in-ball"] = in_ball
    suites["report-recomputability"] = recompute

    # Risk taxonomy: random cells agree with an independent statement of the
    # classification table (exhaustive enumeration lives in the unit tests).
    ok = True
    for _ in range(1000):
        lx = int(rng.integers(1, 5))
        lh, oh = int(rng.integers(0, 5)), int(rng.integers(0, 5))
        cat = classify_risk(_decision(lx), _decision(lh), ox=lx, oxhat=oh).category
        if lh == 0:
            expect = "NO_ERROR" if oh == 0 else "UNCERTAINTY_EXAMPLE"
        elif lh == lx:
            expect = ("NO_ERROR" if oh == lx
                      else "ADVERSARIAL_EXAMPLE" if oh == 0
                      else "INVARIANT_EXAMPLE")
        else:
            expect = ("NO_ERROR" if oh not in (0, lx)
                      else "ADVERSARIAL_EXAMPLE")
        ok &= cat.name == expect
    suites["risk-taxonomy"] = ok

    failed = sorted(name for name, good in suites.items() if not good)
    ok = not failed
    _announce(8, "invariant suites at 1000 random cases each", ok,
              "failed: " + ", ".join(failed) if failed else
              f"{len(suites)} suites")
    assert ok, failed


def _decision(lab):
    from safequant.properties import LabelDecision
    return LabelDecision(label=lab, top_label=max(lab, 1), margin=0.5,
                         epsilon_label=0.0)
