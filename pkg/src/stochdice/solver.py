"""Backward value-function iteration on a tensor grid.

Value tables are stored per period over the grid nodes; the continuation
value is the multilinear interpolant of the next period's table, averaged over
the shock regimes with the transition probabilities.

Given the current state, the controls move only two coordinates of the
successor: investment moves capital and mitigation moves atmospheric carbon.
All other successor coordinates (productivity, upper and lower ocean carbon,
both temperatures) are fixed.  The compiled kernel therefore contracts the
interpolation weights of the fixed coordinates and the regime probabilities
once per node, leaving a bilinear table in (K, M_AT) for the inner
optimizer.  Because multilinear interpolation is separable this gives the
same value as interpolating in all dimensions at every trial point.

Successor coordinates outside the grid box are clamped to it, except for
capital and atmospheric carbon: the controls act on those two directly, and a
clamped (flat) continuation would let the optimizer push them off the grid at
no cost.  Along these two axes the boundary cell is extended linearly.
"""

from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field

import numpy as np
from numba import njit, prange

from .model import (
    C_ALPHA, C_BETA, C_DELTA, C_DISC, C_ETA, C_GAMMA, C_KDEP, C_KFLOOR, C_MEQ,
    C_PHIM, C_PHIT, C_QFLOOR, C_SMAX, C_SMIN, C_THETA2, C_XI1, C_PI2,
    P_A, P_ABATE, P_ELAND, P_FEX, P_GA, P_L, P_MUMAX, P_SIGMA,
    Controls, ExogenousPaths, StateVector, _gross_output, _utility,
    pack_model, shock_transition_matrix, step_state, utility,
)
from .params import ModelParams, ShockSpec
from .reference import GridRanges

log = logging.getLogger(__name__)

__all__ = [
    "Grid",
    "ValueTable",
    "PolicyTable",
    "build_grid",
    "interpolate",
    "expected_continuation",
    "optimize_controls",
    "backward_induction",
    "value_at",
    "save_tables",
    "load_tables",
    "write_tables_csv",
]

STATE_NAMES = ("A", "K", "M_AT", "M_UP", "M_LO", "T_AT", "T_LO")

# Inner optimizer settings.
GOLDEN_TOL = 1e-8
MAX_SWEEPS = 100
SWEEP_RTOL = 1e-12
SCAN_POINTS = 17


@dataclass(frozen=True)
class Grid:
    """Equally spaced nodes per continuous dimension and period.

    ``names`` lists the continuous dimensions in storage order; the regime
    dimension {0, 1} is outermost.  ``lo`` and ``hi`` have one row per period.
    """

    names: tuple
    n: np.ndarray
    lo: np.ndarray
    hi: np.ndarray
    n_regimes: int = 2

    @property
    def d(self) -> int:
        return len(self.names)

    @property
    def N(self) -> int:
        return self.lo.shape[0] - 1

    @property
    def has_A(self) -> bool:
        return self.names[0] == "A"

    @property
    def control_axes(self) -> tuple:
        """Axes moved by the controls (capital, atmospheric carbon)."""
        k = self.names.index("K")
        return (k, k + 1)

    @property
    def shape(self) -> tuple:
        return tuple(int(k) for k in self.n)

    @property
    def n_cont(self) -> int:
        return int(np.prod(self.n))

    @property
    def n_nodes(self) -> int:
        return self.n_regimes * self.n_cont

    @property
    def h(self) -> np.ndarray:
        return (self.hi - self.lo) / (self.n - 1)

    def axes(self, t: int) -> list:
        return [np.linspace(self.lo[t, j], self.hi[t, j], int(self.n[j])) for j in range(self.d)]

    def coords(self, t: int) -> np.ndarray:
        """Node coordinates of period ``t``, shape (n_cont, d), C order."""
        mesh = np.meshgrid(*self.axes(t), indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=1)


def build_grid(ranges: GridRanges, params: ModelParams, spec: ShockSpec,
               n_K: int = 9, n_other: int = 5, n_A: int = 9) -> Grid:
    """Tensor grid over the reference ranges; productivity is a dimension
    only for persistent shocks."""
    if ranges.N != params.N:
        raise ValueError(f"ranges cover {ranges.N} periods, model has N={params.N}")
    counts = {"A": n_A, "K": n_K, "M_AT": n_other, "M_UP": n_other, "M_LO": n_other,
              "T_AT": n_other, "T_LO": n_other}
    names = STATE_NAMES if spec.persistent else STATE_NAMES[1:]
    n = np.array([counts[k] for k in names], dtype=np.int64)
    if np.any(n < 2):
        raise ValueError(f"every grid dimension needs at least 2 nodes, got {dict(zip(names, n))}")
    cols = [STATE_NAMES.index(k) for k in names]
    lo = np.ascontiguousarray(ranges.lo[:, cols])
    hi = np.ascontiguousarray(ranges.hi[:, cols])
    if not np.all(hi > lo):
        raise ValueError("grid ranges must have positive width")
    return Grid(names=tuple(names), n=n, lo=lo, hi=hi)


# -- interpolation ------------------------------------------------------------

def interpolate(table, axes, x, extrapolate=()) -> float:
    """Multilinear interpolation of ``table`` (shape ``[len(a) for a in axes]``)
    at the point ``x``.

    Coordinates outside the box are clamped to it, except along the axes
    listed in ``extrapolate`` where the boundary cell is extended linearly.
    """
    x = np.asarray(x, dtype=float)
    table = np.asarray(table, dtype=float)
    if x.shape != (len(axes),) or table.shape != tuple(len(a) for a in axes):
        raise ValueError("table, axes and point dimensions disagree")
    if not np.all(np.isfinite(x)):
        raise ValueError(f"non-finite interpolation point {x}")
    lower, frac = [], []
    for j, (a, v) in enumerate(zip(axes, x)):
        if j not in extrapolate:
            v = min(max(v, a[0]), a[-1])
        i = int(np.clip(np.searchsorted(a, v, side="right") - 1, 0, len(a) - 2))
        lower.append(i)
        frac.append((v - a[i]) / (a[i + 1] - a[i]))
    total = 0.0
    d = len(axes)
    for corner in range(1 << d):
        w = 1.0
        idx = []
        for j in range(d):
            if corner >> j & 1:
                w *= frac[j]
                idx.append(lower[j] + 1)
            else:
                w *= 1.0 - frac[j]
                idx.append(lower[j])
        if w != 0.0:
            total += w * table[tuple(idx)]
    return total


def _state_coords(state: StateVector, grid: Grid, t: int, paths: ExogenousPaths) -> np.ndarray:
    vals = [state.K, *state.M, *state.T]
    if grid.has_A:
        A = state.A if state.A is not None else paths.A_base[t]
        vals = [A] + vals
    return np.array(vals)


def expected_continuation(V_next, grid: Grid, state: StateVector, controls: Controls, t: int,
                          paths: ExogenousPaths, params: ModelParams, spec: ShockSpec) -> float:
    """Transition-weighted sum of the interpolated period-``t+1`` value over
    the successor regimes.  ``V_next`` has shape (2, *grid.shape)."""
    P = shock_transition_matrix(spec, params)
    axes = grid.axes(t + 1)
    total = 0.0
    for nxt in (0, 1):
        p = P[state.I, nxt]
        if p == 0.0:
            continue
        succ = step_state(state, controls, nxt, t, paths, params, spec)
        total += p * interpolate(V_next[nxt], axes, _state_coords(succ, grid, t + 1, paths),
                                 extrapolate=grid.control_axes)
    return total


# -- compiled kernels -----------------------------------------------------------

# ctx layout
X_Y, X_ABATE, X_DMG, X_L, X_M1BASE, X_M1COEF, X_KBASE, X_LOK, X_HK, X_NK, X_LOM, X_HM, X_NM, X_MUMAX = range(14)
N_CTX = 14


@njit(cache=True)
def _locate(v, lo, h, n):
    u = (v - lo) / h
    if u <= 0.0:
        return 0, 0.0
    if u >= n - 1:
        return n - 2, 1.0
    i = int(math.floor(u))
    if i > n - 2:
        i = n - 2
    return i, u - i


@njit(cache=True)
def _locate_extrap(v, lo, h, n):
    u = (v - lo) / h
    i = int(math.floor(u))
    if i < 0:
        i = 0
    elif i > n - 2:
        i = n - 2
    return i, u - i


@njit(cache=True)
def _prepare(t, x, I, Vn, lo_n, h_n, n, has_A, P, chi, phi, period, mc, W, ctx):
    """Contract the successor table to a (K, M_AT) slice for state ``x``.

    ``x`` is (A, K, M_AT, M_UP, M_LO, T_AT, T_LO); ``Vn`` is (2, n_cont).
    """
    row = period[t]
    L = row[P_L]
    A = x[0] if has_A else row[P_A]
    K, M1, M2, M3, T1, T2 = x[1], x[2], x[3], x[4], x[5], x[6]
    Y = _gross_output(A, K, L, chi[I], mc[C_GAMMA])
    pm = mc[C_PHIM:C_PHIM + 9]
    pt = mc[C_PHIT:C_PHIT + 4]
    D = mc[C_DELTA]
    F = mc[C_ETA] * math.log2(M1 / mc[C_MEQ]) + row[P_FEX]

    d = n.size
    off = 1 if has_A else 0
    kd = off
    md = off + 1
    nxt = np.empty(d)
    if has_A:
        nxt[0] = A * (1.0 + row[P_GA]) * (1.0 - phi[I])
    nxt[off + 2] = pm[3] * M1 + pm[4] * M2 + pm[5] * M3
    nxt[off + 3] = pm[6] * M1 + pm[7] * M2 + pm[8] * M3
    nxt[off + 4] = pt[0] * T1 + pt[1] * T2 + mc[C_XI1] * F
    nxt[off + 5] = pt[2] * T1 + pt[3] * T2

    strides = np.empty(d, dtype=np.int64)
    s = 1
    for j in range(d - 1, -1, -1):
        strides[j] = s
        s *= n[j]

    n_o = d - 2
    o_dim = np.empty(n_o, dtype=np.int64)
    o_i = np.empty(n_o, dtype=np.int64)
    o_w = np.empty(n_o)
    k = 0
    for j in range(d):
        if j == kd or j == md:
            continue
        i0, w = _locate(nxt[j], lo_n[j], h_n[j], n[j])
        o_dim[k] = j
        o_i[k] = i0
        o_w[k] = w
        k += 1

    nK = n[kd]
    nM = n[md]
    sK = strides[kd]
    sM = strides[md]
    p0 = P[I, 0]
    p1 = P[I, 1]
    for a in range(nK):
        for b in range(nM):
            W[a, b] = 0.0
    for corner in range(1 << n_o):
        wt = 1.0
        base = 0
        for k in range(n_o):
            if (corner >> k) & 1:
                wt *= o_w[k]
                base += (o_i[k] + 1) * strides[o_dim[k]]
            else:
                wt *= 1.0 - o_w[k]
                base += o_i[k] * strides[o_dim[k]]
        if wt == 0.0:
            continue
        w0 = wt * p0
        w1 = wt * p1
        for a in range(nK):
            for b in range(nM):
                idx = base + a * sK + b * sM
                v = 0.0
                if w0 != 0.0:
                    v += w0 * Vn[0, idx]
                if w1 != 0.0:
                    v += w1 * Vn[1, idx]
                W[a, b] += v

    ctx[X_Y] = Y
    ctx[X_ABATE] = row[P_ABATE]
    ctx[X_DMG] = mc[C_PI2] * T1 * T1
    ctx[X_L] = L
    ctx[X_M1BASE] = pm[0] * M1 + pm[1] * M2 + pm[2] * M3 + D * mc[C_BETA] * row[P_ELAND]
    ctx[X_M1COEF] = D * mc[C_BETA] * row[P_SIGMA] * Y
    ctx[X_KBASE] = K * mc[C_KDEP]
    ctx[X_LOK] = lo_n[kd]
    ctx[X_HK] = h_n[kd]
    ctx[X_NK] = nK
    ctx[X_LOM] = lo_n[md]
    ctx[X_HM] = h_n[md]
    ctx[X_NM] = nM
    ctx[X_MUMAX] = row[P_MUMAX]


@njit(cache=True)
def _net(mu, ctx, mc):
    Q = (1.0 - ctx[X_ABATE] * mu ** mc[C_THETA2] - ctx[X_DMG]) * ctx[X_Y]
    if Q < mc[C_QFLOOR]:
        Q = mc[C_QFLOOR]
    return Q


@njit(cache=True)
def _objective(mu, inv, Q, ctx, W, mc):
    """Period utility plus discounted expected continuation for investment ``inv``."""
    u = _utility(Q - inv, ctx[X_L], mc[C_ALPHA], mc[C_DELTA])
    Kp = ctx[X_KBASE] + mc[C_DELTA] * inv
    if Kp < mc[C_KFLOOR]:
        Kp = mc[C_KFLOOR]
    Mp = ctx[X_M1BASE] + ctx[X_M1COEF] * (1.0 - mu)
    ia, wa = _locate_extrap(Kp, ctx[X_LOK], ctx[X_HK], int(ctx[X_NK]))
    ib, wb = _locate_extrap(Mp, ctx[X_LOM], ctx[X_HM], int(ctx[X_NM]))
    v = ((1.0 - wa) * ((1.0 - wb) * W[ia, ib] + wb * W[ia, ib + 1])
         + wa * ((1.0 - wb) * W[ia + 1, ib] + wb * W[ia + 1, ib + 1]))
    return u + mc[C_DISC] * v


@njit(cache=True)
def _eval_mu(mu, inv, ctx, W, mc):
    """Objective at ``mu`` with investment held at ``inv`` but kept inside the
    savings-rate bounds of the implied net output."""
    Q = _net(mu, ctx, mc)
    lo = mc[C_SMIN] * Q
    hi = mc[C_SMAX] * Q
    if inv < lo:
        inv = lo
    elif inv > hi:
        inv = hi
    return _objective(mu, inv, Q, ctx, W, mc), inv


@njit(cache=True)
def _golden_inv(mu, Q, a, b, tol, ctx, W, mc):
    r1 = 0.3819660112501051
    r2 = 0.6180339887498949
    c = a + r1 * (b - a)
    d = a + r2 * (b - a)
    fc = _objective(mu, c, Q, ctx, W, mc)
    fd = _objective(mu, d, Q, ctx, W, mc)
    while b - a > tol:
        if fc >= fd:
            b = d
            d = c
            fd = fc
            c = a + r1 * (b - a)
            fc = _objective(mu, c, Q, ctx, W, mc)
        else:
            a = c
            c = d
            fc = fd
            d = a + r2 * (b - a)
            fd = _objective(mu, d, Q, ctx, W, mc)
    if fc >= fd:
        return c, fc
    return d, fd


@njit(cache=True)
def _golden_mu(inv, a, b, tol, ctx, W, mc):
    r1 = 0.3819660112501051
    r2 = 0.6180339887498949
    c = a + r1 * (b - a)
    d = a + r2 * (b - a)
    fc, _ = _eval_mu(c, inv, ctx, W, mc)
    fd, _ = _eval_mu(d, inv, ctx, W, mc)
    while b - a > tol:
        if fc >= fd:
            b = d
            d = c
            fd = fc
            c = a + r1 * (b - a)
            fc, _ = _eval_mu(c, inv, ctx, W, mc)
        else:
            a = c
            c = d
            fc = fd
            d = a + r2 * (b - a)
            fd, _ = _eval_mu(d, inv, ctx, W, mc)
    if fc >= fd:
        return c, fc
    return d, fd


@njit(cache=True)
def _optimize(ctx, W, mc, mu0, s0, out):
    """Alternating golden-section ascent over (mu, investment).

    Writes (mu, consumption, value, savings rate) into ``out``; returns 1 when
    the coarse box scan had to be used, 0 otherwise.
    """
    mu_hi = ctx[X_MUMAX]
    smin = mc[C_SMIN]
    smax = mc[C_SMAX]
    mu = min(max(mu0, 0.0), mu_hi)
    Q = _net(mu, ctx, mc)
    inv = min(max(s0, smin), smax) * Q
    f = _objective(mu, inv, Q, ctx, W, mc)
    converged = False
    for _ in range(MAX_SWEEPS):
        f_start = f
        # investment given mitigation
        Q = _net(mu, ctx, mc)
        a = smin * Q
        b = smax * Q
        x, fx = _golden_inv(mu, Q, a, b, GOLDEN_TOL * Q, ctx, W, mc)
        for e in (a, b):
            fe = _objective(mu, e, Q, ctx, W, mc)
            if fe > fx:
                x, fx = e, fe
        if fx > f:
            inv, f = x, fx
        # mitigation given investment
        m, fm = _golden_mu(inv, 0.0, mu_hi, GOLDEN_TOL, ctx, W, mc)
        for e in (0.0, mu_hi):
            fe, _ = _eval_mu(e, inv, ctx, W, mc)
            if fe > fm:
                m, fm = e, fe
        if fm > f:
            fm, inv = _eval_mu(m, inv, ctx, W, mc)
            mu, f = m, fm
        if f - f_start <= SWEEP_RTOL * (1.0 + abs(f)):
            converged = True
            break
    flag = 0
    if not converged or not math.isfinite(f):
        flag = 1
        for i in range(SCAN_POINTS):
            m = mu_hi * i / (SCAN_POINTS - 1)
            Qm = _net(m, ctx, mc)
            for j in range(SCAN_POINTS):
                sv = smin + (smax - smin) * j / (SCAN_POINTS - 1)
                fv = _objective(m, sv * Qm, Qm, ctx, W, mc)
                if fv > f or not math.isfinite(f):
                    mu, inv, f = m, sv * Qm, fv
    Q = _net(mu, ctx, mc)
    out[0] = mu
    out[1] = Q - inv
    out[2] = f
    out[3] = inv / Q
    return flag


@njit(cache=True)
def _optimize_at(t, x, I, Vn, lo_n, h_n, n, has_A, P, chi, phi, period, mc, mu0, s0, out):
    kd = 1 if has_A else 0
    W = np.empty((n[kd], n[kd + 1]))
    ctx = np.empty(N_CTX)
    _prepare(t, x, I, Vn, lo_n, h_n, n, has_A, P, chi, phi, period, mc, W, ctx)
    return _optimize(ctx, W, mc, mu0, s0, out)


@njit(parallel=True, cache=True)
def _solve_period(t, Vn, lo_t, h_t, lo_n, h_n, n, has_A, P, chi, phi, period, mc,
                  n_reg, V_out, mu_out, c_out, flag_out):
    d = n.size
    last = n[d - 1]
    n_cont = 1
    for j in range(d):
        n_cont *= n[j]
    n_rows = n_cont // last
    kd = 1 if has_A else 0
    mu_c = 0.5 * period[t, P_MUMAX]
    s_c = 0.5 * (mc[C_SMIN] + mc[C_SMAX])
    for r in prange(n_reg * n_rows):
        I = r // n_rows
        rr = r % n_rows
        W = np.empty((n[kd], n[kd + 1]))
        ctx = np.empty(N_CTX)
        coord = np.empty(d)
        x = np.empty(7)
        out = np.empty(4)
        rem = rr
        for j in range(d - 2, -1, -1):
            ij = rem % n[j]
            rem //= n[j]
            coord[j] = lo_t[j] + h_t[j] * ij
        mu_w = mu_c
        s_w = s_c
        for k in range(last):
            coord[d - 1] = lo_t[d - 1] + h_t[d - 1] * k
            if has_A:
                for j in range(7):
                    x[j] = coord[j]
            else:
                x[0] = 0.0
                for j in range(6):
                    x[j + 1] = coord[j]
            _prepare(t, x, I, Vn, lo_n, h_n, n, has_A, P, chi, phi, period, mc, W, ctx)
            flag = _optimize(ctx, W, mc, mu_w, s_w, out)
            idx = rr * last + k
            mu_out[I, idx] = out[0]
            c_out[I, idx] = out[1]
            V_out[I, idx] = out[2]
            flag_out[I, idx] = flag
            mu_w = out[0]
            s_w = out[3]


# -- tables ---------------------------------------------------------------------

@dataclass
class ValueTable:
    """``V[t, regime, node]`` for t = 0..N; ``V[N]`` is identically zero."""

    grid: Grid
    V: np.ndarray

    def at(self, t: int) -> np.ndarray:
        return self.V[t].reshape((self.grid.n_regimes, *self.grid.shape))


@dataclass
class PolicyTable:
    """Optimal mitigation and consumption at every node for t = 0..N-1."""

    grid: Grid
    mu: np.ndarray
    c: np.ndarray
    fallback: np.ndarray
    diagnostics: list = field(default_factory=list)


class _Kernel:
    """Arrays shared by all compiled calls for one (grid, model, shock) setup."""

    def __init__(self, grid: Grid, paths: ExogenousPaths, params: ModelParams, spec: ShockSpec):
        if paths.N != grid.N:
            raise ValueError("grid and exogenous paths have different horizons")
        if spec.persistent != grid.has_A:
            raise ValueError("grid must include productivity exactly when shocks are persistent")
        self.grid = grid
        self.period = np.ascontiguousarray(paths.table)
        self.mc = pack_model(params)
        self.P = shock_transition_matrix(spec, params)
        self.chi = np.array([spec.chi(0), spec.chi(1)])
        self.phi = np.array([spec.phi(0), spec.phi(1)])
        self.lo = np.ascontiguousarray(grid.lo)
        self.h = np.ascontiguousarray(grid.h)
        self.n = np.ascontiguousarray(grid.n)

    def optimize_at(self, t, x7, regime, V_next_flat, mu0, s0):
        out = np.empty(4)
        flag = _optimize_at(t, x7, regime, V_next_flat, self.lo[t + 1], self.h[t + 1], self.n,
                            self.grid.has_A, self.P, self.chi, self.phi, self.period, self.mc,
                            mu0, s0, out)
        return out, flag


def _x7(state: StateVector, t: int, paths: ExogenousPaths) -> np.ndarray:
    A = state.A if state.A is not None else paths.A_base[t]
    return np.array([A, state.K, *state.M, *state.T], dtype=float)


def optimize_controls(state: StateVector, t: int, value: ValueTable, paths: ExogenousPaths,
                      params: ModelParams, spec: ShockSpec, warm=None, _kernel=None):
    """Maximize period utility plus discounted expected continuation at ``state``.

    Returns ``(mu, c, value, fallback)``; ``fallback`` is True when the coarse
    box scan replaced a non-converged ascent.  ``warm`` optionally seeds the
    search with a (mu, savings-rate) pair; the default is the box center.
    """
    if not 0 <= t < value.grid.N:
        raise ValueError(f"no decision at period {t}")
    k = _kernel or _Kernel(value.grid, paths, params, spec)
    if warm is None:
        warm = (0.5 * paths.mu_max[t], 0.5 * (params.s_min + params.s_max))
    out, flag = k.optimize_at(t, _x7(state, t, paths), state.I, value.V[t + 1], *warm)
    return float(out[0]), float(out[1]), float(out[2]), bool(flag)


def value_at(state: StateVector, t: int, value: ValueTable, paths: ExogenousPaths,
             params: ModelParams, spec: ShockSpec) -> float:
    """Bellman value at an arbitrary state (maximizing against the t+1 table)."""
    return optimize_controls(state, t, value, paths, params, spec)[2]


def backward_induction(grid: Grid, paths: ExogenousPaths, params: ModelParams,
                       spec: ShockSpec, progress=None):
    """Solve the Bellman recursion from the zero terminal value back to t = 0.

    Parameters
    ----------
    progress : callable, optional
        Called as ``progress(t, seconds, n_fallback)`` after each period.

    Returns
    -------
    (ValueTable, PolicyTable)
    """
    k = _Kernel(grid, paths, params, spec)
    N = grid.N
    nc = grid.n_cont
    V = np.zeros((N + 1, 2, nc))
    mu = np.zeros((N, 2, nc))
    c = np.zeros((N, 2, nc))
    fb = np.zeros((N, 2, nc), dtype=np.uint8)
    n_reg = 1 if spec.degenerate else 2
    diagnostics = []
    for t in range(N - 1, -1, -1):
        t0 = time.perf_counter()
        _solve_period(t, V[t + 1], k.lo[t], k.h[t], k.lo[t + 1], k.h[t + 1], k.n, grid.has_A,
                      k.P, k.chi, k.phi, k.period, k.mc, n_reg, V[t], mu[t], c[t], fb[t])
        if n_reg == 1:
            V[t, 1] = V[t, 0]
            mu[t, 1] = mu[t, 0]
            c[t, 1] = c[t, 0]
            fb[t, 1] = fb[t, 0]
        bad = ~np.isfinite(V[t])
        if bad.any():
            reg, node = np.argwhere(bad)[0]
            raise FloatingPointError(f"non-finite value at period {t}, regime {reg}, node {node}")
        dt = time.perf_counter() - t0
        nfb = int(fb[t].sum())
        diagnostics.append(dict(t=t, seconds=dt, fallbacks=nfb))
        log.info("period %d solved in %.2fs (%d fallbacks)", t, dt, nfb)
        if progress is not None:
            progress(t, dt, nfb)
    diagnostics.reverse()
    return ValueTable(grid, V), PolicyTable(grid, mu, c, fb, diagnostics)


# -- export -------------------------------------------------------------------------

def save_tables(path, value: ValueTable, policy: PolicyTable) -> None:
    g = value.grid
    np.savez_compressed(path, names=np.array(g.names), n=g.n, lo=g.lo, hi=g.hi, V=value.V,
                        mu=policy.mu, c=policy.c, fallback=policy.fallback)


def load_tables(path):
    with np.load(path) as z:
        g = Grid(names=tuple(str(s) for s in z["names"]), n=z["n"], lo=z["lo"], hi=z["hi"])
        return ValueTable(g, z["V"]), PolicyTable(g, z["mu"], z["c"], z["fallback"])


def write_tables_csv(path, value: ValueTable, policy: PolicyTable, periods=None) -> None:
    """Long dump: period, regime, node, node coordinates, V, mu, c."""
    import csv

    g = value.grid
    periods = range(g.N) if periods is None else periods
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["period", "regime", "node", *g.names, "V", "MIU", "C"])
        for t in periods:
            X = g.coords(t)
            for reg in range(g.n_regimes):
                for j in range(g.n_cont):
                    w.writerow([t, reg, j, *(repr(float(v)) for v in X[j]),
                                repr(float(value.V[t, reg, j])),
                                repr(float(policy.mu[t, reg, j])), repr(float(policy.c[t, reg, j]))])
