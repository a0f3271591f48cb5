"""Calibration of the DICE-2016 model and the shock process.

All constants default to the DICE-2016 values.  ``ModelParams`` can be
round-tripped through an INI-style configuration file with one section per
parameter group.
"""

from __future__ import annotations

import configparser
import dataclasses
import io
import math
from dataclasses import dataclass, field, fields

import numpy as np

__all__ = [
    "ModelParams",
    "ShockSpec",
    "SECTIONS",
    "params_to_config",
    "params_from_config",
    "load_params",
    "save_params",
]


# Section layout used for the configuration file.
SECTIONS: dict[str, tuple[str, ...]] = {
    "time": ("Delta", "N", "start_year"),
    "preferences": ("alpha", "rho"),
    "economy": ("gamma", "delta_K", "L_0", "L_asym", "L_adj", "A_0", "gA_0", "gA_decline"),
    "emissions": ("E_ind_0", "Q_0", "mu_0", "sigma_g0", "sigma_decline", "E_land_0", "E_land_decline"),
    "carbon": ("phi21", "phi32", "M_AT_eq", "M_UP_eq", "M_LO_eq", "beta"),
    "climate": ("xi1", "xi3", "xi4", "t2xco2", "eta", "F_EX_0", "F_EX_1", "F_EX_switch"),
    "damage": ("pi2", "theta2", "backstop_price", "backstop_decline"),
    "controls": ("mu_max_early", "mu_max_late", "mu_switch_year", "s_min", "s_max"),
    "initial": ("K_0", "M_AT_0", "M_UP_0", "M_LO_0", "T_AT_0", "T_LO_0"),
    "numerics": ("Q_floor", "K_floor"),
}


@dataclass(frozen=True)
class ModelParams:
    """DICE-2016 constants.

    Time is counted in periods of ``Delta`` years, ``t = 0`` is ``start_year``.
    Monetary units are trillions of 2010 USD, population is in billions,
    carbon stocks in GtC and temperatures in degrees C above 1900.
    """

    # time
    Delta: float = 5.0
    N: int = 80
    start_year: int = 2015
    # preferences
    alpha: float = 1.45
    rho: float = 0.015
    # economy
    gamma: float = 0.3
    delta_K: float = 0.1
    L_0: float = 7.403
    L_asym: float = 11.5
    L_adj: float = 0.134
    A_0: float = 5.115
    gA_0: float = 0.076
    gA_decline: float = 0.005
    # emissions
    E_ind_0: float = 35.85
    Q_0: float = 105.5
    mu_0: float = 0.03
    sigma_g0: float = -0.0152
    sigma_decline: float = 0.001
    E_land_0: float = 2.6
    E_land_decline: float = 0.115
    # carbon cycle
    phi21: float = 0.12
    phi32: float = 0.007
    M_AT_eq: float = 588.0
    M_UP_eq: float = 360.0
    M_LO_eq: float = 1720.0
    beta: float = 1.0 / 3.666
    # climate
    xi1: float = 0.1005
    xi3: float = 0.088
    xi4: float = 0.025
    t2xco2: float = 3.1
    eta: float = 3.6813
    F_EX_0: float = 0.5
    F_EX_1: float = 1.0
    F_EX_switch: int = 17
    # damages and abatement
    pi2: float = 0.00236
    theta2: float = 2.6
    backstop_price: float = 550.0
    backstop_decline: float = 0.025
    # control bounds
    mu_max_early: float = 1.0
    mu_max_late: float = 1.2
    mu_switch_year: int = 2160
    s_min: float = 0.05
    s_max: float = 0.60
    # initial state
    K_0: float = 223.0
    M_AT_0: float = 851.0
    M_UP_0: float = 460.0
    M_LO_0: float = 1740.0
    T_AT_0: float = 0.85
    T_LO_0: float = 0.0068
    # numerical floors
    Q_floor: float = 1e-6
    K_floor: float = 1e-6

    def __post_init__(self):
        for f in fields(self):
            v = getattr(self, f.name)
            if not math.isfinite(v):
                raise ValueError(f"parameter {f.name!r} is not finite: {v!r}")
        if int(self.N) != self.N or self.N < 1:
            raise ValueError(f"N must be a positive integer, got {self.N!r}")
        if not 0.0 < self.gamma < 1.0:
            raise ValueError(f"gamma must lie in (0, 1), got {self.gamma}")
        for name in ("alpha", "delta_K", "Delta", "theta2", "pi2", "eta"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")
        if self.Delta <= 0:
            raise ValueError("Delta must be positive")
        if not 0.0 <= self.s_min < self.s_max < 1.0:
            raise ValueError("savings-rate bounds must satisfy 0 <= s_min < s_max < 1")
        if self.theta2 <= 1.0:
            raise ValueError("theta2 must exceed 1 for the carbon price to be defined")

    # -- derived quantities -------------------------------------------------

    @property
    def rho_tilde(self) -> float:
        return math.log1p(self.rho)

    @property
    def discount(self) -> float:
        """Per-period utility discount factor exp(-rho_tilde * Delta)."""
        return math.exp(-self.rho_tilde * self.Delta)

    @property
    def sigma_0(self) -> float:
        return self.E_ind_0 / (self.Q_0 * (1.0 - self.mu_0))

    @property
    def xi2(self) -> float:
        return self.eta / self.t2xco2

    @property
    def PhiM(self) -> np.ndarray:
        p11 = 1.0 - self.phi21
        p12 = self.phi21 * self.M_AT_eq / self.M_UP_eq
        p22 = 1.0 - p12 - self.phi32
        p23 = self.phi32 * self.M_UP_eq / self.M_LO_eq
        p33 = 1.0 - p23
        return np.array(
            [[p11, p12, 0.0], [self.phi21, p22, p23], [0.0, self.phi32, p33]]
        )

    @property
    def PhiT(self) -> np.ndarray:
        x1, x2, x3, x4 = self.xi1, self.xi2, self.xi3, self.xi4
        return np.array([[1.0 - x1 * x2 - x1 * x3, x1 * x3], [x4, 1.0 - x4]])

    @property
    def M0(self) -> np.ndarray:
        return np.array([self.M_AT_0, self.M_UP_0, self.M_LO_0])

    @property
    def T0(self) -> np.ndarray:
        return np.array([self.T_AT_0, self.T_LO_0])

    def year(self, t):
        return self.start_year + self.Delta * t

    def mu_max(self, t: int) -> float:
        return self.mu_max_early if self.year(t) < self.mu_switch_year else self.mu_max_late

    def replace(self, **changes) -> "ModelParams":
        return dataclasses.replace(self, **changes)


@dataclass(frozen=True)
class ShockSpec:
    """Two-regime shock process.

    In the stressed regime gross output is reduced by the fraction
    ``chi_stressed``; when ``persistent`` is set, productivity of the next
    period is additionally reduced by ``phi_stressed``.
    """

    p_annual: float = 0.0
    chi_stressed: float = 0.0
    phi_stressed: float = 0.0
    persistent: bool = False

    def __post_init__(self):
        if not 0.0 <= self.p_annual <= 1.0:
            raise ValueError(f"p_annual must lie in [0, 1], got {self.p_annual}")
        if not 0.0 <= self.chi_stressed < 1.0:
            raise ValueError(f"chi_stressed must lie in [0, 1), got {self.chi_stressed}")
        if not 0.0 <= self.phi_stressed < 1.0:
            raise ValueError(f"phi_stressed must lie in [0, 1), got {self.phi_stressed}")
        if self.phi_stressed > 0 and not self.persistent:
            raise ValueError("phi_stressed > 0 requires a persistent shock specification")

    def chi(self, regime: int) -> float:
        return self.chi_stressed if regime > 0 else 0.0

    def phi(self, regime: int) -> float:
        return self.phi_stressed if (regime > 0 and self.persistent) else 0.0

    @property
    def degenerate(self) -> bool:
        """True when the stressed regime is indistinguishable from the normal one."""
        return self.chi_stressed == 0.0 and self.phi(1) == 0.0


# -- configuration file ----------------------------------------------------

def _coerce(name: str, text: str):
    ftype = {f.name: f.type for f in fields(ModelParams)}[name]
    try:
        if ftype in ("int", int):
            value = float(text)
            if value != int(value):
                raise ValueError
            return int(value)
        return float(text)
    except ValueError:
        raise ValueError(f"invalid value for {name!r}: {text!r}") from None


def params_to_config(params: ModelParams) -> configparser.ConfigParser:
    cp = configparser.ConfigParser()
    cp.optionxform = str
    for section, names in SECTIONS.items():
        cp[section] = {name: repr(getattr(params, name)) for name in names}
    return cp


def params_from_config(cp: configparser.ConfigParser, base: ModelParams | None = None) -> ModelParams:
    """Read model parameters from the sections of ``cp``.

    Keys missing from the file keep the value of ``base`` (DICE-2016 defaults
    when not given).  Unknown keys in parameter sections are rejected.
    """
    base = base or ModelParams()
    changes = {}
    for section, names in SECTIONS.items():
        if not cp.has_section(section):
            continue
        for key, text in cp.items(section):
            if key not in names:
                raise ValueError(f"unknown key {section}.{key}")
            changes[key] = _coerce(key, text)
    return base.replace(**changes)


def load_params(path) -> ModelParams:
    cp = configparser.ConfigParser()
    cp.optionxform = str
    with open(path, encoding="utf-8") as fh:
        cp.read_file(fh)
    return params_from_config(cp)


def save_params(params: ModelParams, path) -> None:
    buf = io.StringIO()
    params_to_config(params).write(buf)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(buf.getvalue())
