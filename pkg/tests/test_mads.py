import numpy as np
import pytest

from safequant.mads import (BoxBounds, MadsConfig, MadsState, StartPointError,
                            minimize, poll_stage, search_stage)


def _state(x, value, mesh, poll):
    return MadsState(incumbent=np.asarray(x, dtype=np.float64), value=value,
                     mesh_size=mesh, poll_size=poll)


def _constant(pts):
    return np.zeros(pts.shape[0])


class _IdentityRng:
    """Stand-in generator whose poll basis degenerates to the identity."""

    def __init__(self, n):
        self.n = n
        self._rng = np.random.default_rng(0)

    def standard_normal(self, shape):
        return np.eye(self.n)

    def integers(self, *args, **kwargs):
        return self._rng.integers(*args, **kwargs)


class TestSearchStage:
    def test_constant_objective_never_succeeds(self):
        state = _state([0.5, 0.5], 0.0, 2 ** -10, 1.0)
        rng = np.random.default_rng(0)
        ok, _, _ = search_stage(state, _constant, BoxBounds.unit(2), rng, 32)
        assert not ok

    def test_one_dimensional_mesh_enumeration(self):
        # Mesh points from x=0 with mesh 0.25 and z in {1,2}: {0.25, 0.5}
        # upward, clipped/snapped to 0 downward.  w(x) = |x - 0.5| is
        # minimized at the mesh point 0.5 with value 0.
        state = _state([0.0], abs(0.0 - 0.5), 0.25, 0.5)
        rng = np.random.default_rng(1)
        obj = lambda pts: np.abs(pts[:, 0] - 0.5)
        ok, best, val = search_stage(state, obj, BoxBounds.unit(1), rng, 64)
        assert ok
        assert best[0] == pytest.approx(0.5)
        assert val == pytest.approx(0.0)

    def test_candidates_stay_on_mesh_and_in_box(self):
        state = _state([0.9, 0.1], 1.0, 0.25, 0.5)
        seen = []
        obj = lambda pts: (seen.append(pts.copy()), np.ones(pts.shape[0]))[1]
        search_stage(state, obj, BoxBounds.unit(2), np.random.default_rng(2), 64)
        pts = seen[0]
        assert np.all(pts >= 0) and np.all(pts <= 1)
        steps = (pts - state.incumbent) / state.mesh_size
        np.testing.assert_allclose(steps, np.round(steps), atol=1e-9)

    def test_batch_accounting(self):
        state = _state([0.5, 0.5], 0.0, 2 ** -10, 1.0)
        search_stage(state, _constant, BoxBounds.unit(2),
                     np.random.default_rng(0), 40)
        assert state.fevals == 40
        assert state.batches == 1


class TestPollStage:
    def test_constant_objective_never_succeeds(self):
        state = _state([0.5, 0.5], 0.0, 2 ** -10, 0.25)
        ok, _, _ = poll_stage(state, _constant, BoxBounds.unit(2),
                              np.random.default_rng(0))
        assert not ok

    def test_axis_directions_on_linear_objective(self):
        # With the identity poll basis the poll set is {x +- 0.25 e_i}; the
        # best point on w(x) = x1 + x2 is (0.25, 0.5) or (0.5, 0.25).
        state = _state([0.5, 0.5], 1.0, 2 ** -10, 0.25)
        obj = lambda pts: pts.sum(axis=1)
        ok, best, val = poll_stage(state, obj, BoxBounds.unit(2), _IdentityRng(2))
        assert ok
        assert val == pytest.approx(0.75)
        assert sorted(best) == [pytest.approx(0.25), pytest.approx(0.5)]

    def test_poll_set_size_and_batching(self):
        state = _state([0.5] * 3, 0.0, 2 ** -10, 0.25)
        seen = []
        obj = lambda pts: (seen.append(pts.shape[0]), np.ones(pts.shape[0]))[1]
        poll_stage(state, obj, BoxBounds.unit(3), np.random.default_rng(0))
        assert seen == [6]  # 2n directions, one batch
        assert state.batches == 1

    def test_directions_span_positively(self):
        # The 2n scaled directions must contain a positive multiple of every
        # orthant direction combination; for an orthonormal basis +-Q this
        # holds by construction, so just check pairwise opposites.
        state = _state([0.5] * 4, 0.0, 2 ** -10, 1e-3)
        seen = []
        obj = lambda pts: (seen.append(pts.copy()), np.ones(pts.shape[0]))[1]
        poll_stage(state, obj, BoxBounds.unit(4), np.random.default_rng(3))
        disp = seen[0] - state.incumbent
        np.testing.assert_allclose(disp[:4], -disp[4:], atol=1e-12)
        np.testing.assert_allclose(np.linalg.norm(disp, axis=1), 1e-3, rtol=1e-9)


class TestMinimize:
    def test_quadratic_reaches_known_minimizer(self):
        c = np.array([0.3, 0.8])
        obj = lambda pts: ((pts - c) ** 2).sum(axis=1)
        res = minimize(obj, [0.5, 0.5], BoxBounds.unit(2),
                       MadsConfig(max_fun_evals=5000, seed=0))
        assert res.fevals <= 5000
        assert np.all(np.abs(res.x - c) <= 1e-3)

    def test_constant_objective_runs_until_poll_underflow(self):
        cfg = MadsConfig(max_fun_evals=10 ** 9, seed=0)
        res = minimize(_constant, [0.5, 0.5], BoxBounds.unit(2), cfg)
        assert np.array_equal(res.x, [0.5, 0.5])
        assert res.poll_collapsed
        # poll size 1 halves every failed iteration; 20 halvings underflow
        # 1e-6, and each iteration costs one search and one poll batch.
        n_search, n_poll = cfg.n_search(2), 4
        assert res.fevals == 1 + 20 * (n_search + n_poll)
        assert res.batches == 1 + 2 * 20

    def test_default_config_round_trip(self):
        cfg = MadsConfig()
        assert cfg.initial_mesh_size == 2 ** -10
        assert cfg.initial_poll_size == 1.0
        assert cfg.min_poll_size == 1e-6
        assert cfg.expansion == 2.0

    def test_start_point_errors(self):
        with pytest.raises(StartPointError):
            minimize(_constant, [1.5, 0.5], BoxBounds.unit(2))
        bad = lambda pts: np.full(pts.shape[0], np.inf)
        with pytest.raises(StartPointError):
            minimize(bad, [0.5, 0.5], BoxBounds.unit(2))

    def test_incumbent_trace_monotone(self):
        rng = np.random.default_rng(5)
        a = rng.normal(size=2)
        obj = lambda pts: np.sin(3 * pts @ a) + ((pts - 0.3) ** 2).sum(axis=1)
        res = minimize(obj, [0.5, 0.5], BoxBounds.unit(2),
                       MadsConfig(max_fun_evals=2000, seed=1))
        values = [v for _, v, _ in res.trace]
        assert all(b <= a for a, b in zip(values, values[1:]))

    def test_batching_economy(self):
        obj = lambda pts: ((pts - 0.4) ** 2).sum(axis=1)
        res = minimize(obj, [0.5] * 5, BoxBounds.unit(5),
                       MadsConfig(max_fun_evals=3000, seed=2))
        iterations = len(res.trace) - 1
        assert res.batches <= 2 * iterations + 1

    def test_determinism(self):
        obj = lambda pts: ((pts - 0.7) ** 2).sum(axis=1)
        cfg = MadsConfig(max_fun_evals=1500, seed=9)
        r1 = minimize(obj, [0.2, 0.2], BoxBounds.unit(2), cfg)
        r2 = minimize(obj, [0.2, 0.2], BoxBounds.unit(2), cfg)
        assert r1.trace == r2.trace
        assert np.array_equal(r1.x, r2.x)

    def test_box_feasibility_of_all_candidates(self):
        bounds = BoxBounds(np.array([0.2, 0.3]), np.array([0.6, 0.9]))
        seen = []

        def obj(pts):
            seen.append(pts.copy())
            return ((pts - 0.1) ** 2).sum(axis=1)

        minimize(obj, [0.4, 0.5], bounds, MadsConfig(max_fun_evals=800, seed=3))
        allpts = np.concatenate(seen, axis=0)
        assert np.all(allpts >= bounds.lower - 1e-12)
        assert np.all(allpts <= bounds.upper + 1e-12)

    def test_mesh_poll_coupling_invariant(self):
        # Both sizes start coupled and are always scaled together.
        cfg = MadsConfig()
        assert cfg.initial_mesh_size <= cfg.initial_poll_size
        with pytest.raises(ValueError):
            MadsConfig(initial_mesh_size=2.0, initial_poll_size=1.0)

    def test_nan_objective_treated_as_infeasible(self):
        def obj(pts):
            vals = ((pts - 0.5) ** 2).sum(axis=1)
            vals[pts[:, 0] > 0.7] = np.nan
            return vals

        res = minimize(obj, [0.6, 0.5], BoxBounds.unit(2),
                       MadsConfig(max_fun_evals=600, seed=4))
        assert np.isfinite(res.value)
