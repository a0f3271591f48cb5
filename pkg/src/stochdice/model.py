"""Model equations: exogenous paths, production, climate and one-step transitions.

The scalar kernels (leading underscore) are numba-compiled and shared by the
dynamic-programming solver and the deterministic optimizer, so every code path
evaluates the same arithmetic.  The public functions validate their inputs and
delegate to the kernels.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit

from .params import ModelParams, ShockSpec

__all__ = [
    "StateVector",
    "Controls",
    "ExogenousPaths",
    "build_exogenous_paths",
    "utility",
    "gross_output",
    "damage_abatement_factor",
    "net_output",
    "emissions",
    "radiative_forcing",
    "carbon_price",
    "shock_transition_matrix",
    "step_state",
    "initial_state",
    "pack_model",
]

# Column layout of ExogenousPaths.table (one row per period).
P_L, P_A, P_SIGMA, P_ELAND, P_FEX, P_GA, P_ABATE, P_MUMAX = range(8)
N_PERIOD_COLS = 8

# Layout of the packed constant vector handed to compiled kernels.
(
    C_ALPHA, C_DELTA, C_GAMMA, C_KDEP, C_BETA, C_XI1, C_ETA, C_MEQ, C_PI2,
    C_THETA2, C_QFLOOR, C_KFLOOR, C_DISC, C_SMIN, C_SMAX,
) = range(15)
C_PHIM = 15  # 9 entries, row-major
C_PHIT = 24  # 4 entries, row-major
N_CONST = 28


@dataclass(frozen=True)
class StateVector:
    """Economy and climate state at the start of a period.

    ``A`` is only meaningful when productivity is a state variable
    (persistent shocks); otherwise it is carried along for reference.
    """

    K: float
    M: np.ndarray
    T: np.ndarray
    I: int = 0
    A: float | None = None

    def __post_init__(self):
        M = np.asarray(self.M, dtype=float)
        T = np.asarray(self.T, dtype=float)
        if M.shape != (3,) or T.shape != (2,):
            raise ValueError("M must have 3 components and T 2 components")
        object.__setattr__(self, "M", M)
        object.__setattr__(self, "T", T)
        if not self.K > 0:
            raise ValueError(f"capital must be positive, got {self.K}")
        if not np.all(M > 0):
            raise ValueError(f"carbon stocks must be positive, got {M}")
        if not np.all(np.isfinite(T)):
            raise ValueError(f"temperatures must be finite, got {T}")
        if self.I not in (0, 1):
            raise ValueError(f"shock regime must be 0 or 1, got {self.I}")
        if self.A is not None and not self.A > 0:
            raise ValueError(f"productivity must be positive, got {self.A}")


@dataclass(frozen=True)
class Controls:
    mu: float
    c: float

    def __post_init__(self):
        if not self.mu >= 0:
            raise ValueError(f"mitigation rate must be non-negative, got {self.mu}")
        if not self.c > 0:
            raise ValueError(f"consumption must be positive, got {self.c}")


@dataclass(frozen=True)
class ExogenousPaths:
    """Deterministic inputs for periods ``t = 0..N``.

    ``table`` holds the same series column-wise for the compiled kernels;
    ``gA`` is the productivity growth applied between ``t`` and ``t + 1``.
    """

    L: np.ndarray
    A_base: np.ndarray
    sigma: np.ndarray
    E_land: np.ndarray
    F_EX: np.ndarray
    gA: np.ndarray
    backstop: np.ndarray
    mu_max: np.ndarray
    table: np.ndarray

    @property
    def N(self) -> int:
        return len(self.L) - 1


def build_exogenous_paths(params: ModelParams) -> ExogenousPaths:
    """Population, productivity, emission intensity, land emissions and forcing paths."""
    N = int(params.N)
    if N < 1:
        raise ValueError("N must be at least 1")
    D = params.Delta
    t = np.arange(N + 1)

    L = np.empty(N + 1)
    L[0] = params.L_0
    for i in range(1, N + 1):
        L[i] = L[i - 1] * (params.L_asym / L[i - 1]) ** params.L_adj

    # growth of productivity from period t to t+1
    ga = params.gA_0 * np.exp(-params.gA_decline * D * t)
    gA = ga / (1.0 - ga)
    A = np.empty(N + 1)
    A[0] = params.A_0
    for i in range(1, N + 1):
        A[i] = A[i - 1] * (1.0 + gA[i - 1])

    g = np.empty(N + 1)
    sigma = np.empty(N + 1)
    g[0] = params.sigma_g0
    sigma[0] = params.sigma_0
    for i in range(1, N + 1):
        g[i] = g[i - 1] * (1.0 - params.sigma_decline) ** D
        sigma[i] = sigma[i - 1] * math.exp(g[i - 1] * D)

    E_land = params.E_land_0 * (1.0 - params.E_land_decline) ** t
    ramp = params.F_EX_0 + (params.F_EX_1 - params.F_EX_0) * t / params.F_EX_switch
    F_EX = np.where(t < params.F_EX_switch, ramp, params.F_EX_1)
    backstop = params.backstop_price * (1.0 - params.backstop_decline) ** t
    mu_max = np.array([params.mu_max(i) for i in t])

    table = np.empty((N + 1, N_PERIOD_COLS))
    table[:, P_L] = L
    table[:, P_A] = A
    table[:, P_SIGMA] = sigma
    table[:, P_ELAND] = E_land
    table[:, P_FEX] = F_EX
    table[:, P_GA] = gA
    table[:, P_ABATE] = sigma * backstop / (1000.0 * params.theta2)
    table[:, P_MUMAX] = mu_max
    if not np.all(np.isfinite(table)):
        raise ValueError("exogenous paths contain non-finite values")
    for arr in (L, A, sigma, E_land, F_EX, gA, backstop, mu_max):
        arr.setflags(write=False)
    table.setflags(write=False)
    return ExogenousPaths(L, A, sigma, E_land, F_EX, gA, backstop, mu_max, table)


def pack_model(params: ModelParams) -> np.ndarray:
    """Constants in the flat layout read by the compiled kernels."""
    c = np.zeros(N_CONST)
    c[C_ALPHA] = params.alpha
    c[C_DELTA] = params.Delta
    c[C_GAMMA] = params.gamma
    c[C_KDEP] = (1.0 - params.delta_K) ** params.Delta
    c[C_BETA] = params.beta
    c[C_XI1] = params.xi1
    c[C_ETA] = params.eta
    c[C_MEQ] = params.M_AT_eq
    c[C_PI2] = params.pi2
    c[C_THETA2] = params.theta2
    c[C_QFLOOR] = params.Q_floor
    c[C_KFLOOR] = params.K_floor
    c[C_DISC] = params.discount
    c[C_SMIN] = params.s_min
    c[C_SMAX] = params.s_max
    c[C_PHIM:C_PHIM + 9] = params.PhiM.ravel()
    c[C_PHIT:C_PHIT + 4] = params.PhiT.ravel()
    return c


# -- compiled scalar kernels -------------------------------------------------

@njit(cache=True)
def _utility(c, L, alpha, Delta):
    if alpha == 1.0:
        return Delta * L * math.log(c / L)
    return Delta * L / (1.0 - alpha) * ((c / L) ** (1.0 - alpha) - 1.0)


@njit(cache=True)
def _gross_output(A, K, L, chi, gamma):
    return (1.0 - chi) * A * K ** gamma * L ** (1.0 - gamma)


@njit(cache=True)
def _omega(mu, abate_coef, T_AT, theta2, pi2):
    return 1.0 - abate_coef * mu ** theta2 - pi2 * T_AT * T_AT


@njit(cache=True)
def _forcing(M_AT, F_EX, eta, M_eq):
    return eta * math.log2(M_AT / M_eq) + F_EX


@njit(cache=True)
def _step(A, K, M1, M2, M3, T1, T2, mu, c, chi, phi, t, period, mc, persistent, out):
    """One transition; writes (A', K', M1', M2', M3', T1', T2') into ``out``."""
    row = period[t]
    L = row[P_L]
    if not persistent:
        A = row[P_A]
    Y = _gross_output(A, K, L, chi, mc[C_GAMMA])
    Q = _omega(mu, row[P_ABATE], T1, mc[C_THETA2], mc[C_PI2]) * Y
    if Q < mc[C_QFLOOR]:
        Q = mc[C_QFLOOR]
    E = (1.0 - mu) * row[P_SIGMA] * Y + row[P_ELAND]
    F = _forcing(M1, row[P_FEX], mc[C_ETA], mc[C_MEQ])
    D = mc[C_DELTA]
    Kn = K * mc[C_KDEP] + D * (Q - c)
    if Kn < mc[C_KFLOOR]:
        Kn = mc[C_KFLOOR]
    pm = mc[C_PHIM:C_PHIM + 9]
    pt = mc[C_PHIT:C_PHIT + 4]
    if persistent:
        out[0] = A * (1.0 + row[P_GA]) * (1.0 - phi)
    else:
        out[0] = period[t + 1, P_A]
    out[1] = Kn
    out[2] = pm[0] * M1 + pm[1] * M2 + pm[2] * M3 + D * mc[C_BETA] * E
    out[3] = pm[3] * M1 + pm[4] * M2 + pm[5] * M3
    out[4] = pm[6] * M1 + pm[7] * M2 + pm[8] * M3
    out[5] = pt[0] * T1 + pt[1] * T2 + mc[C_XI1] * F
    out[6] = pt[2] * T1 + pt[3] * T2
    return Q


# -- public API --------------------------------------------------------------

def utility(c, L, params: ModelParams):
    """Period utility of aggregate consumption ``c`` shared by population ``L``."""
    c = np.asarray(c, dtype=float)
    L = np.asarray(L, dtype=float)
    if np.any(~(c > 0)) or np.any(~(L > 0)):
        raise ValueError("utility requires c > 0 and L > 0")
    a, D = params.alpha, params.Delta
    if a == 1.0:
        out = D * L * np.log(c / L)
    else:
        out = D * L / (1.0 - a) * ((c / L) ** (1.0 - a) - 1.0)
    return out[()]


def gross_output(A, K, L, chi, params: ModelParams) -> float:
    """Cobb-Douglas output reduced by the shock fraction ``chi``."""
    if not (A > 0 and K > 0 and L > 0):
        raise ValueError(f"gross output requires A, K, L > 0 (got {A}, {K}, {L})")
    if not 0.0 <= chi < 1.0:
        raise ValueError(f"shock fraction must lie in [0, 1), got {chi}")
    return _gross_output(float(A), float(K), float(L), float(chi), params.gamma)


def damage_abatement_factor(mu, sigma_t, T_AT, t, params: ModelParams) -> float:
    """Share of gross output left after abatement cost and climate damage.

    Can be negative for extreme temperatures; callers decide how to handle it.
    """
    if mu < 0 or t < 0:
        raise ValueError("damage_abatement_factor requires mu >= 0 and t >= 0")
    backstop = params.backstop_price * (1.0 - params.backstop_decline) ** t
    coef = sigma_t * backstop / (1000.0 * params.theta2)
    return _omega(float(mu), coef, float(T_AT), params.theta2, params.pi2)


def _state_A(state: StateVector, t: int, paths: ExogenousPaths, spec: ShockSpec | None) -> float:
    if spec is not None and spec.persistent:
        if state.A is None:
            raise ValueError("persistent shocks require productivity in the state")
        return state.A
    return paths.A_base[t]


def _check_mu(mu, t, paths):
    if not 0.0 <= mu <= paths.mu_max[t]:
        raise ValueError(f"mitigation rate {mu} outside [0, {paths.mu_max[t]}] at t={t}")


def net_output(state: StateVector, mu, t, paths: ExogenousPaths, params: ModelParams,
               spec: ShockSpec | None = None) -> float:
    """Output net of damages and abatement, floored at ``params.Q_floor``."""
    _check_mu(mu, t, paths)
    spec = spec or ShockSpec()
    A = _state_A(state, t, paths, spec)
    Y = gross_output(A, state.K, paths.L[t], spec.chi(state.I), params)
    omega = _omega(float(mu), paths.table[t, P_ABATE], state.T[0], params.theta2, params.pi2)
    return max(omega * Y, params.Q_floor)


def emissions(state: StateVector, mu, t, paths: ExogenousPaths, params: ModelParams,
              spec: ShockSpec | None = None) -> float:
    """Industrial plus land-use emissions in GtCO2 per year."""
    _check_mu(mu, t, paths)
    spec = spec or ShockSpec()
    A = _state_A(state, t, paths, spec)
    Y = gross_output(A, state.K, paths.L[t], spec.chi(state.I), params)
    return (1.0 - mu) * paths.sigma[t] * Y + paths.E_land[t]


def radiative_forcing(M_AT, t, paths: ExogenousPaths, params: ModelParams) -> float:
    if not M_AT > 0:
        raise ValueError(f"atmospheric carbon must be positive, got {M_AT}")
    return _forcing(float(M_AT), paths.F_EX[t], params.eta, params.M_AT_eq)


def carbon_price(mu, t, params: ModelParams):
    """Marginal abatement cost in USD per ton CO2; zero at ``mu = 0``."""
    mu = np.asarray(mu, dtype=float)
    t = np.asarray(t, dtype=float)
    if np.any(mu < 0):
        raise ValueError("carbon price requires mu >= 0")
    backstop = params.backstop_price * (1.0 - params.backstop_decline) ** t
    return (backstop * mu ** (params.theta2 - 1.0))[()]


def shock_transition_matrix(spec: ShockSpec, params: ModelParams) -> np.ndarray:
    """Per-period regime transition matrix; the stressed regime always reverts."""
    q = (1.0 - spec.p_annual) ** params.Delta
    return np.array([[q, 1.0 - q], [1.0, 0.0]])


def initial_state(params: ModelParams, spec: ShockSpec | None = None, regime: int = 0) -> StateVector:
    A = params.A_0 if (spec is not None and spec.persistent) else None
    return StateVector(K=params.K_0, M=params.M0, T=params.T0, I=regime, A=A)


def step_state(state: StateVector, controls: Controls, next_shock: int, t: int,
               paths: ExogenousPaths, params: ModelParams,
               spec: ShockSpec | None = None, mc: np.ndarray | None = None) -> StateVector:
    """Advance the state by one period with all continuous disturbances at zero."""
    if not 0 <= t < paths.N:
        raise ValueError(f"period {t} outside [0, {paths.N - 1}]")
    _check_mu(controls.mu, t, paths)
    spec = spec or ShockSpec()
    A = _state_A(state, t, paths, spec)
    if mc is None:
        mc = pack_model(params)
    out = np.empty(7)
    _step(A, state.K, state.M[0], state.M[1], state.M[2], state.T[0], state.T[1],
          float(controls.mu), float(controls.c), spec.chi(state.I), spec.phi(state.I),
          t, paths.table, mc, spec.persistent, out)
    if not np.all(np.isfinite(out)):
        raise ValueError(f"non-finite state after step at t={t}: {out}")
    return StateVector(K=out[1], M=out[2:5], T=out[5:7], I=int(next_shock),
                       A=out[0] if spec.persistent else None)
