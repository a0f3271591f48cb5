import csv

import numpy as np
import pytest

from stochdice.model import Controls, initial_state, step_state
from stochdice.params import ModelParams
from stochdice.reference import (
    REFERENCE_COLUMNS, GridRanges, _Problem, discounted_welfare, grid_ranges_from_reference,
    replay, solve_deterministic, write_reference_csv,
)


def _welfare(mu, s, params, paths):
    """Objective of a control path evaluated through the public transition."""
    return discounted_welfare(replay(mu, s, params, paths)["c"], params, paths)


def test_objective_matches_independent_evaluation(ref, params, paths):
    assert _welfare(ref.mu, ref.s, params, paths) == pytest.approx(ref.objective, rel=1e-12)


def test_beats_minimal_controls(ref, params, paths):
    mu = np.zeros(params.N + 1)
    mu[0] = params.mu_0
    s = np.full(params.N + 1, params.s_min)
    assert ref.objective >= _welfare(mu, s, params, paths)


def test_initial_output(ref):
    assert ref.Y[0] == pytest.approx(105.2, abs=0.1)


def test_replay_is_bit_exact(ref, params, paths):
    rep = replay(ref.mu, ref.s, params, paths)
    np.testing.assert_array_equal(rep["K"], ref.K)
    np.testing.assert_array_equal(rep["M"], ref.M)
    np.testing.assert_array_equal(rep["T"], ref.T)


def test_controls_within_bounds(ref, params, paths):
    assert np.all(ref.mu >= 0) and np.all(ref.mu <= paths.mu_max)
    assert np.all(ref.s >= params.s_min) and np.all(ref.s <= params.s_max)
    assert ref.mu[0] == params.mu_0


def test_first_step_reproduces_reference(ref, params, paths):
    s0 = initial_state(params)
    s1 = step_state(s0, Controls(0.03, ref.c[0]), 0, 0, paths, params)
    assert s1.K == ref.K[1]
    np.testing.assert_array_equal(s1.M, ref.M[1])
    np.testing.assert_array_equal(s1.T, ref.T[1])


def test_no_single_control_move_improves(ref, params, paths):
    base = _welfare(ref.mu, ref.s, params, paths)
    N = params.N
    for t in range(N):
        for arr, lo, hi in ((ref.mu, 0.0, paths.mu_max[t]), (ref.s, params.s_min, params.s_max)):
            if arr is ref.mu and t == 0:
                continue  # fixed first-period mitigation
            for d in (-1e-4, 1e-4):
                v = arr[t] + d
                if not lo <= v <= hi:
                    continue
                mu, s = ref.mu.copy(), ref.s.copy()
                (mu if arr is ref.mu else s)[t] = v
                if t == N - 1:  # the horizon entry repeats the last decision
                    (mu if arr is ref.mu else s)[N] = v
                assert _welfare(mu, s, params, paths) <= base + 1e-12 * abs(base)


def test_restart_seed_does_not_matter(ref, params):
    other = solve_deterministic(params, seed=7)
    assert other.objective == pytest.approx(ref.objective, rel=1e-6)
    assert ref.converged and other.converged


def test_adjoint_gradient_against_finite_differences(params, paths):
    prob = _Problem(params, paths, fix_mu0=True)
    rng = np.random.default_rng(3)
    z = rng.uniform(prob.lo + 0.05, prob.hi - 0.05)
    J, g = prob.welfare_and_grad(z)
    for i in rng.choice(z.size, 12, replace=False):
        h = 1e-6
        zp, zm = z.copy(), z.copy()
        zp[i] += h
        zm[i] -= h
        fd = (prob.welfare(zp) - prob.welfare(zm)) / (2 * h)
        assert g[i] == pytest.approx(fd, rel=1e-5, abs=1e-6)


def test_shape_of_trajectory(ref, params):
    assert ref.N == params.N
    assert ref.year[0] == 2015 and ref.year[-1] == 2015 + 5 * params.N
    assert ref.mu[-1] == ref.mu[-2] and ref.s[-1] == ref.s[-2]


# -- grid ranges -------------------------------------------------------------------

def test_grid_range_examples(ref):
    r = grid_ranges_from_reference(ref)
    names = GridRanges.names
    k, a, tat = names.index("K"), names.index("A"), names.index("T_AT")
    assert r.lo[0, k] == pytest.approx(133.8, rel=1e-14)
    assert r.hi[0, k] == pytest.approx(312.2, rel=1e-14)
    assert r.lo[0, a] == pytest.approx(3.069, rel=1e-14)
    assert r.hi[0, a] == pytest.approx(5.115, rel=1e-14)
    assert np.all(r.lo[:, tat] == 0.0)
    np.testing.assert_allclose(r.hi[:, tat], 1.4 * ref.T[:, 0].max())
    mat = names.index("M_AT")
    np.testing.assert_allclose(r.lo[:, mat], 0.6 * ref.M[:, 0].min())
    np.testing.assert_allclose(r.hi[:, mat], 1.4 * ref.M[:, 0].max())
    np.testing.assert_allclose(r.lo[:, k], 0.6 * ref.K)


def test_degenerate_range_rejected(ref):
    with pytest.raises(ValueError, match="degenerate"):
        grid_ranges_from_reference(ref, k_band=(1.0, 1.0))


def test_reference_csv(ref, tmp_path):
    path = tmp_path / "ref.csv"
    write_reference_csv(ref, path, periods=40)
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["t", "year", *REFERENCE_COLUMNS]
    assert len(rows) == 42
    col = rows[0].index("TATM")
    assert float(rows[11][col]) == ref.T[10, 0]


def test_alternative_calibration_solves():
    p = ModelParams(N=6)
    r = solve_deterministic(p, restarts=2)
    assert r.converged
    assert r.N == 6
