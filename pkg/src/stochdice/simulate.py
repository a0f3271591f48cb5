"""Forward Monte Carlo of shocked trajectories and probability bands."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field, replace

import numpy as np

from .model import (
    Controls, ExogenousPaths, StateVector, carbon_price, emissions, gross_output,
    initial_state, net_output, radiative_forcing, shock_transition_matrix, step_state,
    utility,
)
from .params import ModelParams, ShockSpec
from .reference import ReferenceTrajectory
from .solver import PolicyTable, ValueTable, _Kernel, _x7

__all__ = [
    "ScenarioConfig",
    "SCENARIOS",
    "scenario",
    "Trajectory",
    "draw_uniforms",
    "simulate_trajectories",
    "derived_outputs",
    "quantile_bands",
    "discounted_utility",
    "stressed_fraction",
    "OUTPUT_VARIABLES",
    "write_trajectories_csv",
    "write_band_csv",
]

OUTPUT_VARIABLES = ("MIU", "S", "K", "YNET", "TATM", "TOCEAN", "CPRICE", "DAMFCT",
                    "MAT", "MU", "ML")

STOCHASTIC_OPTIMAL = "stochastic-optimal"
DETERMINISTIC_FIXED = "deterministic-fixed"


@dataclass(frozen=True)
class ScenarioConfig:
    """What to simulate: the shock process, where controls come from, and how many paths."""

    name: str
    shock: ShockSpec
    policy: str = STOCHASTIC_OPTIMAL
    trajectories: int = 1000
    seed: int = 0
    forced_prefix: tuple = (0, 1)

    def __post_init__(self):
        if self.trajectories < 1:
            raise ValueError("need at least one trajectory")
        if self.policy not in (STOCHASTIC_OPTIMAL, DETERMINISTIC_FIXED):
            raise ValueError(f"unknown policy source {self.policy!r}")
        if any(r not in (0, 1) for r in self.forced_prefix):
            raise ValueError("forced regimes must be 0 or 1")

    def replace(self, **changes) -> "ScenarioConfig":
        return replace(self, **changes)


_A1 = ShockSpec(p_annual=0.01, chi_stressed=0.05)
_A2 = ShockSpec(p_annual=0.01, chi_stressed=0.10)
_B = ShockSpec(p_annual=0.01, chi_stressed=0.05, phi_stressed=0.05, persistent=True)

SCENARIOS = {
    "A1": ScenarioConfig("A1", _A1),
    "A2": ScenarioConfig("A2", _A2),
    "B": ScenarioConfig("B", _B),
    "C": ScenarioConfig("C", _B, policy=DETERMINISTIC_FIXED),
    "deterministic": ScenarioConfig("deterministic", ShockSpec(), policy=DETERMINISTIC_FIXED,
                                    forced_prefix=()),
}


def scenario(name: str, **changes) -> ScenarioConfig:
    try:
        base = SCENARIOS[name]
    except KeyError:
        raise ValueError(f"unknown scenario {name!r}; choose from {sorted(SCENARIOS)}") from None
    return base.replace(**changes) if changes else base


@dataclass
class Trajectory:
    """One simulated path over t = 0..H.

    ``I[t]`` is the regime in force during period t.  Derived series are
    filled by :func:`derived_outputs`.
    """

    A: np.ndarray
    K: np.ndarray
    M: np.ndarray
    T: np.ndarray
    I: np.ndarray
    mu: np.ndarray
    c: np.ndarray
    Q: np.ndarray = None
    Y: np.ndarray = None
    E: np.ndarray = None
    F: np.ndarray = None
    P: np.ndarray = None
    s: np.ndarray = None
    damage: np.ndarray = None
    fallbacks: int = 0

    @property
    def H(self) -> int:
        return len(self.K) - 1

    def state(self, t: int, persistent: bool) -> StateVector:
        return StateVector(K=self.K[t], M=self.M[t], T=self.T[t], I=int(self.I[t]),
                           A=self.A[t] if persistent else None)

    def series(self) -> dict[str, np.ndarray]:
        return {
            "MIU": self.mu, "S": self.s, "K": self.K, "YNET": self.Q,
            "TATM": self.T[:, 0], "TOCEAN": self.T[:, 1], "CPRICE": self.P,
            "DAMFCT": self.damage, "MAT": self.M[:, 0], "MU": self.M[:, 1],
            "ML": self.M[:, 2],
        }


def draw_uniforms(seed: int, trajectories: int, periods: int) -> np.ndarray:
    """Regime-switching draws, one per (trajectory, period), in a fixed order."""
    return np.random.default_rng(seed).random((trajectories, periods))


def _same_grid(a, b) -> bool:
    return a is b or (tuple(a.names) == tuple(b.names) and np.array_equal(a.n, b.n)
                      and np.array_equal(a.lo, b.lo) and np.array_equal(a.hi, b.hi))


def _regime_path(u, P, H, prefix) -> np.ndarray:
    I = np.zeros(H + 1, dtype=np.int64)
    for t in range(1, H + 1):
        if t < len(prefix):
            I[t] = prefix[t]
        else:
            I[t] = 0 if u[t] < P[I[t - 1], 0] else 1
    if len(prefix) > 0:
        I[0] = prefix[0]
    return I


def simulate_trajectories(config: ScenarioConfig, policy, value: ValueTable | None,
                          grid, paths: ExogenousPaths, params: ModelParams, *,
                          reference: ReferenceTrajectory | None = None,
                          horizon: int | None = None,
                          uniforms: np.ndarray | None = None) -> list[Trajectory]:
    """Simulate ``config.trajectories`` paths forward from the initial state.

    Parameters
    ----------
    config : ScenarioConfig
        Shock process, policy source, path count and seed.
    policy : PolicyTable or ReferenceTrajectory
        A policy table for the stochastic-optimal source (controls are then
        re-optimized at each realized state against ``value``), or the
        shock-free reference trajectory for the deterministic-fixed source.
    value : ValueTable or None
        Required for the stochastic-optimal source, must be None otherwise.
    grid : Grid or None
        Grid of ``value``; checked for consistency.
    reference : ReferenceTrajectory, optional
        Supplies the t = 0 controls for the stochastic-optimal source.  When
        ``policy`` is itself a reference trajectory it is used directly.
    horizon : int, optional
        Last simulated period, defaults to ``paths.N``.
    uniforms : ndarray, optional
        Regime draws of shape ``(trajectories, horizon + 1)``; passing the
        same array to two policy sources gives common random numbers.
        Drawn from ``config.seed`` when omitted.

    Returns
    -------
    list of Trajectory
    """
    N = paths.N
    H = N if horizon is None else int(horizon)
    if not 1 <= H <= N:
        raise ValueError(f"horizon must lie in [1, {N}], got {H}")
    spec = config.shock
    optimal = config.policy == STOCHASTIC_OPTIMAL
    if optimal:
        if not isinstance(policy, PolicyTable):
            raise ValueError("stochastic-optimal simulation needs a PolicyTable policy source")
        if value is None:
            raise ValueError("stochastic-optimal simulation needs a value table")
        if reference is None:
            raise ValueError("stochastic-optimal simulation needs the reference for t = 0")
        if grid is not None and not _same_grid(grid, value.grid):
            raise ValueError("grid does not match the value table")
        if value.grid.has_A != spec.persistent or value.grid.N != N:
            raise ValueError("value table was solved for a different model configuration")
        kernel = _Kernel(value.grid, paths, params, spec)
        ref = reference
    else:
        if not isinstance(policy, ReferenceTrajectory):
            raise ValueError("deterministic-fixed simulation needs the reference trajectory")
        if value is not None:
            raise ValueError("deterministic-fixed simulation does not use a value table")
        ref = policy
    if ref.N != N:
        raise ValueError("reference trajectory and model horizons differ")
    if uniforms is None:
        uniforms = draw_uniforms(config.seed, config.trajectories, H + 1)
    if uniforms.shape[0] < config.trajectories or uniforms.shape[1] < H + 1:
        raise ValueError("not enough uniform draws for the requested simulation")
    P = shock_transition_matrix(spec, params)

    out = []
    for m in range(config.trajectories):
        I = _regime_path(uniforms[m], P, H, config.forced_prefix)
        A = np.empty(H + 1)
        K = np.empty(H + 1)
        M = np.empty((H + 1, 3))
        T = np.empty((H + 1, 2))
        mu = np.empty(H + 1)
        c = np.empty(H + 1)
        sv = np.empty(H + 1)
        state = initial_state(params, spec, regime=int(I[0]))
        warm = (ref.mu[1], ref.s[1])
        n_fb = 0
        for t in range(H + 1):
            A[t] = state.A if spec.persistent else paths.A_base[t]
            K[t], M[t], T[t] = state.K, state.M, state.T
            if t == 0 or not optimal:
                mu_t = min(ref.mu[t], paths.mu_max[t])
                s_t = ref.s[t]
            elif t == N:
                # no decision is left at the horizon; repeat the last rates
                mu_t = min(mu[t - 1], paths.mu_max[t])
                s_t = s_prev
            else:
                res, flag = kernel.optimize_at(t, _x7(state, t, paths), state.I,
                                               value.V[t + 1], *warm)
                mu_t, s_t = float(res[0]), float(res[3])
                warm = (mu_t, s_t)
                n_fb += flag
            c_t = (1.0 - s_t) * net_output(state, mu_t, t, paths, params, spec)
            s_prev = s_t
            mu[t], c[t], sv[t] = mu_t, c_t, s_t
            if t < H:
                state = step_state(state, Controls(mu_t, c_t), int(I[t + 1]), t, paths,
                                   params, spec)
        traj = Trajectory(A=A, K=K, M=M, T=T, I=I, mu=mu, c=c, s=sv, fallbacks=n_fb)
        out.append(derived_outputs(traj, paths, params, spec))
    return out


def derived_outputs(traj: Trajectory, paths: ExogenousPaths, params: ModelParams,
                    spec: ShockSpec | None = None) -> Trajectory:
    """Fill net and gross output, emissions, forcing, carbon price, savings
    rate and damage fraction for every period of ``traj``.

    A savings rate already stored on the trajectory (the rate that was
    applied) is kept; otherwise it is computed as ``1 - c / Q``.
    """
    spec = spec or ShockSpec()
    H = traj.H
    Q, Y, E, F = (np.empty(H + 1) for _ in range(4))
    for t in range(H + 1):
        st = traj.state(t, spec.persistent)
        Y[t] = gross_output(traj.A[t], st.K, paths.L[t], spec.chi(st.I), params)
        Q[t] = net_output(st, traj.mu[t], t, paths, params, spec)
        E[t] = emissions(st, traj.mu[t], t, paths, params, spec)
        F[t] = radiative_forcing(st.M[0], t, paths, params)
    traj.Q, traj.Y, traj.E, traj.F = Q, Y, E, F
    if traj.s is None:
        traj.s = 1.0 - traj.c / Q
    traj.P = np.asarray(carbon_price(traj.mu, np.arange(H + 1), params), dtype=float)
    traj.damage = params.pi2 * traj.T[:, 0] ** 2
    return traj


def quantile_bands(trajectories, probabilities=(0.025, 0.975), variables=OUTPUT_VARIABLES):
    """Per-period empirical quantiles and mean of each output variable.

    Returns ``{variable: {"mean": array, p: array, ...}}`` with the
    quantiles keyed by their probability.
    """
    if len(trajectories) == 0:
        raise ValueError("no trajectories to summarize")
    for p in probabilities:
        if not 0.0 < p < 1.0:
            raise ValueError(f"probabilities must lie in (0, 1), got {p}")
    bands = {}
    for var in variables:
        X = np.stack([tr.series()[var] for tr in trajectories])
        # centring on the first path keeps the mean exact when all paths agree
        entry = {"mean": X[0] + (X - X[0]).mean(axis=0)}
        qs = np.quantile(X, probabilities, axis=0)
        for p, q in zip(probabilities, qs):
            entry[p] = q
        bands[var] = entry
    return bands


def discounted_utility(traj: Trajectory, paths: ExogenousPaths, params: ModelParams,
                       horizon: int | None = None) -> float:
    """Sum of discounted period utilities along one trajectory for t < horizon."""
    n = traj.H if horizon is None else horizon
    t = np.arange(n)
    return float(np.sum(params.discount ** t * utility(traj.c[:n], paths.L[:n], params)))


def stressed_fraction(trajectories, start=2, stop=40) -> float:
    I = np.stack([tr.I[start:stop + 1] for tr in trajectories])
    return float(I.mean())


# -- CSV output --------------------------------------------------------------

def write_trajectories_csv(path, scenario_name, trajectories, periods=None,
                           variables=OUTPUT_VARIABLES) -> None:
    """Long format: scenario, trajectory, t, variable, value."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["scenario", "trajectory", "t", "variable", "value"])
        for m, tr in enumerate(trajectories):
            ser = tr.series()
            n = tr.H + 1 if periods is None else min(periods + 1, tr.H + 1)
            for t in range(n):
                for var in variables:
                    w.writerow([scenario_name, m, t, var, repr(float(ser[var][t]))])


def write_band_csv(path, band: dict, reference: np.ndarray, periods: int,
                   probabilities=(0.025, 0.975)) -> None:
    """Wide band file for one variable: t, q025, mean, q975, deterministic."""
    lo, hi = probabilities
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t", "q025", "mean", "q975", "deterministic"])
        for t in range(periods + 1):
            w.writerow([t, repr(float(band[lo][t])), repr(float(band["mean"][t])),
                        repr(float(band[hi][t])), repr(float(reference[t]))])
