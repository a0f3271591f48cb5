"""Shock-free DICE-2016 solved by direct trajectory optimization.

The reference trajectory serves three purposes: it calibrates the state-space
grid of the dynamic-programming solver, it supplies the fixed policy of the
deterministic-policy scenario, and it is an independent oracle for the DP
solution with shocks switched off.

The optimizer works on the savings-rate parameterization ``c = (1 - s) Q``.
The discounted utility sum and its gradient (by a backward adjoint pass) are
compiled with numba; L-BFGS-B finds the optimum and coordinate-wise golden
section sweeps polish it so that no single-control perturbation improves it.
"""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field

import numpy as np
from numba import njit
from scipy.optimize import minimize

from .model import (
    C_ALPHA, C_BETA, C_DELTA, C_DISC, C_ETA, C_GAMMA, C_KDEP, C_KFLOOR, C_MEQ,
    C_PHIM, C_PHIT, C_PI2, C_QFLOOR, C_THETA2, C_XI1,
    P_A, P_ABATE, P_ELAND, P_FEX, P_L, P_SIGMA,
    Controls, ExogenousPaths, StateVector, _utility, build_exogenous_paths,
    carbon_price, initial_state, pack_model, step_state,
)
from .optimize import golden_section_max
from .params import ModelParams

log = logging.getLogger(__name__)

__all__ = [
    "ReferenceTrajectory",
    "GridRanges",
    "solve_deterministic",
    "grid_ranges_from_reference",
    "discounted_welfare",
    "write_reference_csv",
    "REFERENCE_COLUMNS",
]

REFERENCE_COLUMNS = ("MIU", "S", "K", "YNET", "TATM", "TOCEAN", "CPRICE",
                     "DAMFCT", "MAT", "MU", "ML")


@njit(cache=True)
def _rollout(mu, s, x0, period, mc, N, X, aux):
    """Forward pass.  Fills states ``X`` (N+1, 6) and per-period ``aux`` (N, 4):
    gross output, net output, consumption and the Q-floor indicator."""
    alpha = mc[C_ALPHA]
    D = mc[C_DELTA]
    disc = mc[C_DISC]
    pm = mc[C_PHIM:C_PHIM + 9]
    pt = mc[C_PHIT:C_PHIT + 4]
    for j in range(6):
        X[0, j] = x0[j]
    J = 0.0
    w = 1.0
    for t in range(N):
        K, M1, M2, M3, T1, T2 = X[t, 0], X[t, 1], X[t, 2], X[t, 3], X[t, 4], X[t, 5]
        row = period[t]
        L = row[P_L]
        Y = row[P_A] * K ** mc[C_GAMMA] * L ** (1.0 - mc[C_GAMMA])
        Q = (1.0 - row[P_ABATE] * mu[t] ** mc[C_THETA2] - mc[C_PI2] * T1 * T1) * Y
        floored = 0.0
        if Q < mc[C_QFLOOR]:
            Q = mc[C_QFLOOR]
            floored = 1.0
        c = (1.0 - s[t]) * Q
        J += w * _utility(c, L, alpha, D)
        w *= disc
        E = (1.0 - mu[t]) * row[P_SIGMA] * Y + row[P_ELAND]
        F = mc[C_ETA] * math.log2(M1 / mc[C_MEQ]) + row[P_FEX]
        Kn = K * mc[C_KDEP] + D * (Q - c)
        if Kn < mc[C_KFLOOR]:
            Kn = mc[C_KFLOOR]
        X[t + 1, 0] = Kn
        X[t + 1, 1] = pm[0] * M1 + pm[1] * M2 + pm[2] * M3 + D * mc[C_BETA] * E
        X[t + 1, 2] = pm[3] * M1 + pm[4] * M2 + pm[5] * M3
        X[t + 1, 3] = pm[6] * M1 + pm[7] * M2 + pm[8] * M3
        X[t + 1, 4] = pt[0] * T1 + pt[1] * T2 + mc[C_XI1] * F
        X[t + 1, 5] = pt[2] * T1 + pt[3] * T2
        aux[t, 0] = Y
        aux[t, 1] = Q
        aux[t, 2] = c
        aux[t, 3] = floored
    return J


@njit(cache=True)
def _gradient(mu, s, period, mc, N, X, aux, gmu, gs):
    """Backward adjoint pass after ``_rollout``; gradients of the welfare sum."""
    alpha = mc[C_ALPHA]
    D = mc[C_DELTA]
    gamma = mc[C_GAMMA]
    theta = mc[C_THETA2]
    pm = mc[C_PHIM:C_PHIM + 9]
    pt = mc[C_PHIT:C_PHIT + 4]
    lam = np.zeros(6)
    new = np.zeros(6)
    w = mc[C_DISC] ** (N - 1)
    for t in range(N - 1, -1, -1):
        K, M1, T1 = X[t, 0], X[t, 1], X[t, 4]
        row = period[t]
        L = row[P_L]
        Y, Q, c, floored = aux[t, 0], aux[t, 1], aux[t, 2], aux[t, 3]
        # a floored capital stock does not respond to its inputs
        lamK = lam[0] if X[t + 1, 0] > mc[C_KFLOOR] else 0.0
        gc = w * D * (c / L) ** (-alpha)
        dJdQ = gc * (1.0 - s[t]) + lamK * D * s[t]
        dJdE = lam[1] * D * mc[C_BETA]
        dJdF = lam[4] * mc[C_XI1]
        if floored > 0.0:
            dQdK = 0.0
            dQdT = 0.0
            dQdmu = 0.0
        else:
            omega = Q / Y
            dQdK = omega * gamma * Y / K
            dQdT = -2.0 * mc[C_PI2] * T1 * Y
            dQdmu = -row[P_ABATE] * theta * mu[t] ** (theta - 1.0) * Y
        dEdK = (1.0 - mu[t]) * row[P_SIGMA] * gamma * Y / K
        dEdmu = -row[P_SIGMA] * Y
        gmu[t] = dJdQ * dQdmu + dJdE * dEdmu
        gs[t] = -gc * Q + lamK * D * Q
        new[0] = dJdQ * dQdK + dJdE * dEdK + lamK * mc[C_KDEP]
        new[1] = (lam[1] * pm[0] + lam[2] * pm[3] + lam[3] * pm[6]
                  + dJdF * mc[C_ETA] / (M1 * math.log(2.0)))
        new[2] = lam[1] * pm[1] + lam[2] * pm[4] + lam[3] * pm[7]
        new[3] = lam[1] * pm[2] + lam[2] * pm[5] + lam[3] * pm[8]
        new[4] = lam[4] * pt[0] + lam[5] * pt[2] + dJdQ * dQdT
        new[5] = lam[4] * pt[1] + lam[5] * pt[3]
        for j in range(6):
            lam[j] = new[j]
        w /= mc[C_DISC]


class _Problem:
    """Welfare as a function of the free controls (mu_1.., s_0..)."""

    def __init__(self, params: ModelParams, paths: ExogenousPaths, fix_mu0: bool):
        self.N = paths.N
        self.period = np.ascontiguousarray(paths.table)
        self.mc = pack_model(params)
        self.x0 = np.array([params.K_0, *params.M0, *params.T0])
        self.fix_mu0 = fix_mu0
        self.mu0 = params.mu_0
        N = self.N
        self.X = np.empty((N + 1, 6))
        self.aux = np.empty((N, 4))
        self.gmu = np.empty(N)
        self.gs = np.empty(N)
        off = 1 if fix_mu0 else 0
        mu_hi = paths.mu_max[off:N]
        self.bounds = ([(0.0, float(h)) for h in mu_hi]
                       + [(params.s_min, params.s_max)] * N)
        self.lo = np.array([b[0] for b in self.bounds])
        self.hi = np.array([b[1] for b in self.bounds])
        self.n_mu = N - off

    def split(self, z):
        mu = np.empty(self.N)
        if self.fix_mu0:
            mu[0] = self.mu0
            mu[1:] = z[: self.n_mu]
        else:
            mu[:] = z[: self.n_mu]
        s = np.ascontiguousarray(z[self.n_mu:])
        return mu, s

    def welfare(self, z) -> float:
        mu, s = self.split(z)
        return _rollout(mu, s, self.x0, self.period, self.mc, self.N, self.X, self.aux)

    def welfare_and_grad(self, z):
        mu, s = self.split(z)
        J = _rollout(mu, s, self.x0, self.period, self.mc, self.N, self.X, self.aux)
        _gradient(mu, s, self.period, self.mc, self.N, self.X, self.aux, self.gmu, self.gs)
        off = 1 if self.fix_mu0 else 0
        return J, np.concatenate([self.gmu[off:], self.gs])


def _polish(prob: _Problem, z, tol, max_sweeps, width=1e-3):
    """Coordinate-wise golden-section sweeps on brackets around the current point."""
    z = z.copy()
    J = prob.welfare(z)
    sweeps = 0
    for sweeps in range(1, max_sweeps + 1):
        J_start = J
        for i in range(z.size):
            a = max(prob.lo[i], z[i] - width)
            b = min(prob.hi[i], z[i] + width)
            if b <= a:
                continue
            xi = z[i]

            def f(v):
                z[i] = v
                return prob.welfare(z)

            v, fv = golden_section_max(f, a, b, tol=1e-10)
            for cand in (a, b):
                fc = f(cand)
                if fc > fv:
                    v, fv = cand, fc
            if fv > J:
                z[i] = v
                J = fv
            else:
                z[i] = xi
        if J - J_start <= tol * abs(J):
            break
    return z, J, sweeps


def _coordinate_check(prob: _Problem, z, step=1e-4):
    """Largest welfare gain from moving a single control by +-step."""
    J = prob.welfare(z)
    best = 0.0
    zz = z.copy()
    for i in range(z.size):
        for d in (-step, step):
            v = z[i] + d
            if v < prob.lo[i] or v > prob.hi[i]:
                continue
            zz[i] = v
            best = max(best, prob.welfare(zz) - J)
        zz[i] = z[i]
    return best


@dataclass
class ReferenceTrajectory:
    """Optimal shock-free path for periods ``t = 0..N``.

    Controls are optimized for ``t < N``; the entries at ``t = N`` repeat the
    last decision so that derived series are defined on the whole horizon.
    """

    t: np.ndarray
    year: np.ndarray
    A: np.ndarray
    K: np.ndarray
    M: np.ndarray
    T: np.ndarray
    mu: np.ndarray
    s: np.ndarray
    c: np.ndarray
    Y: np.ndarray
    Q: np.ndarray
    E: np.ndarray
    F: np.ndarray
    P: np.ndarray
    damage: np.ndarray
    objective: float
    converged: bool = True
    diagnostics: dict = field(default_factory=dict)

    @property
    def N(self) -> int:
        return len(self.t) - 1

    def state(self, t: int) -> StateVector:
        return StateVector(K=self.K[t], M=self.M[t], T=self.T[t], I=0, A=self.A[t])

    def series(self) -> dict[str, np.ndarray]:
        """Output series keyed by the figure panel names."""
        return {
            "MIU": self.mu, "S": self.s, "K": self.K, "YNET": self.Q,
            "TATM": self.T[:, 0], "TOCEAN": self.T[:, 1], "CPRICE": self.P,
            "DAMFCT": self.damage, "MAT": self.M[:, 0], "MU": self.M[:, 1],
            "ML": self.M[:, 2],
        }


def replay(mu, s, params: ModelParams, paths: ExogenousPaths) -> dict[str, np.ndarray]:
    """Run savings-rate controls through ``step_state`` and collect all series."""
    N = paths.N
    mc = pack_model(params)
    state = initial_state(params)
    K = np.empty(N + 1)
    M = np.empty((N + 1, 3))
    T = np.empty((N + 1, 2))
    Q = np.empty(N + 1)
    E = np.empty(N + 1)
    F = np.empty(N + 1)
    Y = np.empty(N + 1)
    c = np.empty(N + 1)
    from .model import emissions, gross_output, net_output, radiative_forcing
    for t in range(N + 1):
        K[t], M[t], T[t] = state.K, state.M, state.T
        Y[t] = gross_output(paths.A_base[t], state.K, paths.L[t], 0.0, params)
        Q[t] = net_output(state, mu[t], t, paths, params)
        E[t] = emissions(state, mu[t], t, paths, params)
        F[t] = radiative_forcing(state.M[0], t, paths, params)
        c[t] = (1.0 - s[t]) * Q[t]
        if t < N:
            state = step_state(state, Controls(mu[t], c[t]), 0, t, paths, params, mc=mc)
    return dict(K=K, M=M, T=T, Q=Q, E=E, F=F, Y=Y, c=c)


def discounted_welfare(c, params: ModelParams, paths: ExogenousPaths, horizon=None) -> float:
    """Sum of discounted period utilities of a consumption path for t < horizon."""
    n = paths.N if horizon is None else horizon
    mc = pack_model(params)
    total, w = 0.0, 1.0
    for t in range(n):
        total += w * _utility(float(c[t]), paths.L[t], mc[C_ALPHA], mc[C_DELTA])
        w *= mc[C_DISC]
    return total


def solve_deterministic(params: ModelParams | None = None, *, restarts: int = 5,
                        seed: int = 0, tol: float = 1e-8, fix_mu0: bool = True,
                        max_polish_sweeps: int = 50) -> ReferenceTrajectory:
    """Maximize discounted utility of the shock-free model over all controls.

    Parameters
    ----------
    params : ModelParams
        Calibration; defaults to DICE-2016.
    restarts : int
        Number of starting points.  The first is a smooth heuristic path, the
        rest are uniform random draws inside the control bounds.
    seed : int
        Seed of the random starting points.
    tol : float
        Relative tolerance on the objective change between polish sweeps.
    fix_mu0 : bool
        Hold the first-period mitigation rate at ``params.mu_0`` as DICE-2016
        does for the already observed year.

    Returns
    -------
    ReferenceTrajectory
        Best local optimum across restarts.  ``converged`` is False when no
        restart passed the single-coordinate perturbation check.
    """
    params = params or ModelParams()
    paths = build_exogenous_paths(params)
    prob = _Problem(params, paths, fix_mu0)
    rng = np.random.default_rng(seed)
    N = prob.N

    starts = []
    t = np.arange(N)
    mu_guess = np.minimum(0.03 + 0.04 * t, paths.mu_max[:N])[(1 if fix_mu0 else 0):]
    s_guess = np.full(N, 0.25)
    starts.append(np.clip(np.concatenate([mu_guess, s_guess]), prob.lo, prob.hi))
    for _ in range(max(restarts, 1) - 1):
        starts.append(rng.uniform(prob.lo, prob.hi))

    best = None
    runs = []
    for k, z0 in enumerate(starts):
        res = minimize(lambda z: tuple(-v for v in prob.welfare_and_grad(z)), z0,
                       jac=True, method="L-BFGS-B", bounds=prob.bounds,
                       options=dict(maxiter=20000, maxfun=40000, ftol=1e-15, gtol=1e-10,
                                    maxcor=30))
        z, J, sweeps = _polish(prob, np.clip(res.x, prob.lo, prob.hi), tol, max_polish_sweeps)
        gain = _coordinate_check(prob, z)
        ok = gain <= 1e-12 * max(1.0, abs(J))
        runs.append(dict(restart=k, objective=J, lbfgs_iterations=int(res.nit),
                         lbfgs_message=str(res.message), polish_sweeps=sweeps,
                         max_coordinate_gain=gain, local_optimum=ok))
        log.debug("restart %d: J=%.10f gain=%.2e", k, J, gain)
        if best is None or J > best[1]:
            best = (z, J, ok)

    z, J, ok = best
    if not ok:
        log.warning("deterministic optimizer did not reach a coordinate-wise optimum")
    mu, s = prob.split(z)
    mu = np.append(mu, mu[-1])
    s = np.append(s, s[-1])
    mu = np.minimum(mu, paths.mu_max)
    rep = replay(mu, s, params, paths)
    t = np.arange(N + 1)
    return ReferenceTrajectory(
        t=t, year=params.year(t), A=paths.A_base.copy(), K=rep["K"], M=rep["M"],
        T=rep["T"], mu=mu, s=s, c=rep["c"], Y=rep["Y"], Q=rep["Q"], E=rep["E"],
        F=rep["F"], P=np.asarray(carbon_price(mu, t, params)),
        damage=params.pi2 * rep["T"][:, 0] ** 2, objective=float(J), converged=ok,
        diagnostics=dict(restarts=runs, seed=seed),
    )


@dataclass(frozen=True)
class GridRanges:
    """Per-period bounds of the continuous states.

    Columns follow the order (A, K, M_AT, M_UP, M_LO, T_AT, T_LO); rows are
    periods ``0..N``.
    """

    lo: np.ndarray
    hi: np.ndarray

    names = ("A", "K", "M_AT", "M_UP", "M_LO", "T_AT", "T_LO")

    @property
    def N(self) -> int:
        return self.lo.shape[0] - 1


def grid_ranges_from_reference(ref: ReferenceTrajectory, k_band=(0.6, 1.4),
                               m_band=(0.6, 1.4), t_scale=1.4, a_band=(0.6, 1.0)) -> GridRanges:
    """State-space box around the reference path.

    Capital and productivity ranges follow the reference path period by period;
    carbon and temperature ranges are constant and span the extremes of the
    whole reference trajectory.
    """
    n = ref.N + 1
    lo = np.empty((n, 7))
    hi = np.empty((n, 7))
    lo[:, 0], hi[:, 0] = a_band[0] * ref.A, a_band[1] * ref.A
    lo[:, 1], hi[:, 1] = k_band[0] * ref.K, k_band[1] * ref.K
    for j in range(3):
        lo[:, 2 + j] = m_band[0] * ref.M[:, j].min()
        hi[:, 2 + j] = m_band[1] * ref.M[:, j].max()
    for j in range(2):
        lo[:, 5 + j] = 0.0
        hi[:, 5 + j] = t_scale * ref.T[:, j].max()
    if not np.all(hi > lo):
        bad = [GridRanges.names[j] for j in range(7) if not np.all(hi[:, j] > lo[:, j])]
        raise ValueError(f"degenerate grid range for {bad}")
    return GridRanges(lo=lo, hi=hi)


def write_reference_csv(ref: ReferenceTrajectory, path, periods: int | None = None) -> None:
    """One row per period with the figure panel columns."""
    series = ref.series()
    n = ref.N + 1 if periods is None else min(periods + 1, ref.N + 1)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t", "year", *REFERENCE_COLUMNS])
        for t in range(n):
            w.writerow([t, int(ref.year[t])] + [repr(float(series[k][t])) for k in REFERENCE_COLUMNS])
