import csv

import numpy as np
import pytest

from stochdice.model import Controls, build_exogenous_paths, shock_transition_matrix, step_state
from stochdice.params import ModelParams, ShockSpec
from stochdice.reference import grid_ranges_from_reference
from stochdice.simulate import (
    DETERMINISTIC_FIXED, OUTPUT_VARIABLES, SCENARIOS, ScenarioConfig, Trajectory,
    derived_outputs, draw_uniforms, quantile_bands, scenario, simulate_trajectories,
    stressed_fraction, write_band_csv, write_trajectories_csv,
)
from stochdice.solver import backward_induction, build_grid


@pytest.fixture(scope="module")
def small_b(small):
    p, paths, ref = small
    cfg = scenario("B", trajectories=25, seed=4)
    g = build_grid(grid_ranges_from_reference(ref), p, cfg.shock, n_K=4, n_other=2, n_A=3)
    V, pol = backward_induction(g, paths, p, cfg.shock)
    return cfg, g, V, pol


def _fixed(name, **kw):
    return scenario(name, policy=DETERMINISTIC_FIXED, **kw)


# -- scenarios --------------------------------------------------------------------

def test_scenario_table():
    assert SCENARIOS["A1"].shock == ShockSpec(0.01, 0.05, 0.0, False)
    assert SCENARIOS["A2"].shock == ShockSpec(0.01, 0.10, 0.0, False)
    assert SCENARIOS["B"].shock == ShockSpec(0.01, 0.05, 0.05, True)
    assert SCENARIOS["C"].shock == SCENARIOS["B"].shock
    assert SCENARIOS["C"].policy == DETERMINISTIC_FIXED
    for name in ("A1", "A2", "B"):
        assert SCENARIOS[name].policy == "stochastic-optimal"
    for name in ("A1", "A2", "B", "C"):
        assert SCENARIOS[name].forced_prefix == (0, 1)


def test_scenario_validation():
    with pytest.raises(ValueError):
        ScenarioConfig("x", ShockSpec(), trajectories=0)
    with pytest.raises(ValueError):
        ScenarioConfig("x", ShockSpec(), policy="greedy")
    with pytest.raises(ValueError):
        scenario("Z")


# -- simulation ---------------------------------------------------------------------

def test_without_randomness_every_path_is_the_reference(ref, params, paths):
    trajs = simulate_trajectories(_fixed("deterministic", trajectories=4), ref, None, None,
                                  paths, params)
    for tr in trajs:
        np.testing.assert_array_equal(tr.K, ref.K)
        np.testing.assert_array_equal(tr.M, ref.M)
        np.testing.assert_array_equal(tr.T, ref.T)
        np.testing.assert_array_equal(tr.I, 0)


def test_forced_prefix(ref, params, paths):
    trajs = simulate_trajectories(_fixed("A1", trajectories=300, seed=1), ref, None, None,
                                  paths, params, horizon=5)
    I = np.stack([tr.I for tr in trajs])
    assert np.all(I[:, 0] == 0) and np.all(I[:, 1] == 1) and np.all(I[:, 2] == 0)


def _exact_stressed_fraction(P, start, stop):
    """Expected share of stressed periods given a stressed period at t = 1."""
    dist = np.array([0.0, 1.0])
    total = 0.0
    for t in range(2, stop + 1):
        dist = dist @ P
        if t >= start:
            total += dist[1]
    return total / (stop - start + 1)


def test_stressed_share_matches_chain(ref, params, paths):
    cfg = _fixed("A1", trajectories=1000, seed=42)
    trajs = simulate_trajectories(cfg, ref, None, None, paths, params, horizon=40)
    got = stressed_fraction(trajs, 2, 40)
    exact = _exact_stressed_fraction(shock_transition_matrix(cfg.shock, params), 2, 40)
    assert abs(got - exact) < 0.01
    assert abs(got - (1 - 0.99 ** 5)) < 0.01


def test_stored_paths_obey_transition(small_b, small):
    p, paths, ref = small
    cfg, g, V, pol = small_b
    trajs = simulate_trajectories(cfg, pol, V, g, paths, p, reference=ref)
    for tr in trajs[:10]:
        for t in range(p.N):
            s = tr.state(t, persistent=True)
            nxt = step_state(s, Controls(tr.mu[t], tr.c[t]), int(tr.I[t + 1]), t, paths, p,
                             cfg.shock)
            assert nxt.K == tr.K[t + 1] and nxt.A == tr.A[t + 1]
            np.testing.assert_array_equal(nxt.M, tr.M[t + 1])
            np.testing.assert_array_equal(nxt.T, tr.T[t + 1])
        assert tr.mu[0] == ref.mu[0] and tr.s[0] == ref.s[0]
        assert np.all(tr.s >= p.s_min - 1e-12) and np.all(tr.s <= p.s_max + 1e-12)


def test_same_seed_same_paths(small_b, small):
    p, paths, ref = small
    cfg, g, V, pol = small_b
    a = simulate_trajectories(cfg, pol, V, g, paths, p, reference=ref)
    b = simulate_trajectories(cfg, pol, V, g, paths, p, reference=ref)
    c = simulate_trajectories(cfg.replace(seed=5), pol, V, g, paths, p, reference=ref)
    for x, y in zip(a, b):
        for var in OUTPUT_VARIABLES:
            assert x.series()[var].tobytes() == y.series()[var].tobytes()
    assert any(not np.array_equal(x.I, z.I) for x, z in zip(a, c))


def test_common_random_numbers_share_regimes(small_b, small):
    p, paths, ref = small
    cfg, g, V, pol = small_b
    u = draw_uniforms(9, cfg.trajectories, p.N + 1)
    opt = simulate_trajectories(cfg, pol, V, g, paths, p, reference=ref, uniforms=u)
    fix = simulate_trajectories(cfg.replace(policy=DETERMINISTIC_FIXED), ref, None, None,
                                paths, p, uniforms=u)
    for a, b in zip(opt, fix):
        np.testing.assert_array_equal(a.I, b.I)


def test_fixed_policy_repeats_reference_controls(ref, params, paths):
    trajs = simulate_trajectories(scenario("C", trajectories=50, seed=2), ref, None, None,
                                  paths, params)
    for tr in trajs:
        np.testing.assert_array_equal(tr.mu, ref.mu)
        np.testing.assert_array_equal(tr.s, ref.s)
        np.testing.assert_array_equal(tr.P, ref.P)


def test_policy_source_mismatch_rejected(small_b, small):
    p, paths, ref = small
    cfg, g, V, pol = small_b
    with pytest.raises(ValueError):
        simulate_trajectories(cfg, ref, V, g, paths, p, reference=ref)
    with pytest.raises(ValueError):
        simulate_trajectories(cfg, pol, None, g, paths, p, reference=ref)
    with pytest.raises(ValueError):
        simulate_trajectories(cfg, pol, V, g, paths, p)
    with pytest.raises(ValueError):
        simulate_trajectories(scenario("C"), pol, V, g, paths, p)
    with pytest.raises(ValueError):
        simulate_trajectories(scenario("C"), ref, V, None, paths, p)
    a1 = scenario("A1")
    with pytest.raises(ValueError):
        simulate_trajectories(a1, pol, V, g, paths, p, reference=ref)


def test_horizon_checked(ref, params, paths):
    with pytest.raises(ValueError):
        simulate_trajectories(scenario("C"), ref, None, None, paths, params, horizon=0)
    with pytest.raises(ValueError):
        simulate_trajectories(scenario("C"), ref, None, None, paths, params,
                              horizon=params.N + 1)


# -- bands -------------------------------------------------------------------------

def _flat_trajectories(values, H=3):
    out = []
    for v in values:
        z = np.full(H + 1, float(v))
        tr = Trajectory(A=z, K=z, M=np.tile(z[:, None], 3), T=np.tile(z[:, None], 2),
                        I=np.zeros(H + 1, int), mu=z, c=z, Q=z, s=z, P=z, damage=z)
        out.append(tr)
    return out


def test_identical_paths_give_zero_width():
    bands = quantile_bands(_flat_trajectories([2.5] * 7))
    for var in OUTPUT_VARIABLES:
        b = bands[var]
        np.testing.assert_array_equal(b[0.025], b[0.975])
        np.testing.assert_array_equal(b["mean"], b[0.975])


def test_two_paths_ordering():
    b = quantile_bands(_flat_trajectories([1.0, 3.0]))["K"]
    np.testing.assert_array_equal(b["mean"], 2.0)
    assert np.all(b[0.025] >= 1.0) and np.all(b[0.975] <= 3.0)
    assert np.all(b[0.025] <= b["mean"]) and np.all(b["mean"] <= b[0.975])


def test_uniform_sample_quantiles():
    u = np.random.default_rng(8).random(1000)
    b = quantile_bands(_flat_trajectories(u))["K"]
    assert abs(b[0.025][0] - 0.025) < 0.02
    assert abs(b[0.975][0] - 0.975) < 0.02


def test_band_errors():
    with pytest.raises(ValueError):
        quantile_bands([])
    with pytest.raises(ValueError):
        quantile_bands(_flat_trajectories([1.0, 2.0]), probabilities=(0.0, 0.5))


# -- derived series ------------------------------------------------------------------

def test_derived_output_examples():
    p = ModelParams(N=2)
    paths = build_exogenous_paths(p)
    K = np.array([223.0, 240.0, 260.0])
    M = np.tile(p.M0, (3, 1))
    T = np.array([[2.0, 0.1], [0.0, 0.1], [1.0, 0.1]])
    tr = Trajectory(A=paths.A_base.copy(), K=K, M=M, T=T, I=np.zeros(3, int),
                    mu=np.array([1.0, 0.0, 0.5]), c=np.ones(3))
    derived_outputs(tr, paths, p)
    assert tr.damage[0] == pytest.approx(4 * 0.00236, rel=1e-15)
    assert tr.damage[0] == pytest.approx(0.00944, rel=1e-12)
    assert tr.P[0] == 550.0
    assert tr.P[1] == 0.0
    # consuming all of net output means a zero savings rate
    tr2 = Trajectory(A=tr.A, K=K, M=M, T=T, I=tr.I, mu=tr.mu, c=tr.Q.copy())
    derived_outputs(tr2, paths, p)
    np.testing.assert_allclose(tr2.s, 0.0, atol=1e-15)
    assert tr2.F[0] == pytest.approx(3.6813 * np.log2(851 / 588) + 0.5, rel=1e-13)


# -- files --------------------------------------------------------------------------

def test_csv_outputs(ref, params, paths, tmp_path):
    trajs = simulate_trajectories(scenario("C", trajectories=3, seed=1), ref, None, None,
                                  paths, params, horizon=40)
    write_trajectories_csv(tmp_path / "long.csv", "C", trajs)
    with open(tmp_path / "long.csv", newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["scenario", "trajectory", "t", "variable", "value"]
    assert len(rows) == 1 + 3 * 41 * len(OUTPUT_VARIABLES)
    bands = quantile_bands(trajs)
    write_band_csv(tmp_path / "band.csv", bands["TATM"], ref.T[:, 0], 40)
    with open(tmp_path / "band.csv", newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["t", "q025", "mean", "q975", "deterministic"]
    assert len(rows) == 42
    assert float(rows[1][4]) == ref.T[0, 0]
