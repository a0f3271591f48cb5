"""Command line pipeline: reference solve, grid, backward induction,
simulation, probability bands, CSV and optional SVG output.

Usage::

    python -m stochdice run --scenario A1 --fast --out runs/a1 --svg
    python -m stochdice run scenario=B n-periods=80 report-periods=40
    python -m stochdice fan runs/a1/bands.csv TATM tatm.svg

Settings are resolved in this order, later sources winning: the embedded
defaults, the ``--config`` file, ``--fast``, the dedicated flags, and finally
``--set key=value`` and positional ``key=value`` overrides.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import hashlib
import io
import json
import logging
import sys
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .model import build_exogenous_paths
from .params import SECTIONS, ModelParams, params_from_config, params_to_config
from .reference import grid_ranges_from_reference, solve_deterministic, write_reference_csv
from .simulate import (
    OUTPUT_VARIABLES, SCENARIOS, STOCHASTIC_OPTIMAL, quantile_bands, scenario,
    simulate_trajectories, write_band_csv, write_trajectories_csv,
)
from .solver import backward_induction, build_grid

__all__ = ["RunSettings", "RunManifest", "resolve_settings", "run", "render_fan_chart", "main"]

log = logging.getLogger(__name__)

RUN_SECTION = "run"
RUN_KEYS = {
    "scenario": str,
    "seed": int,
    "trajectories": int,
    "report-periods": int,
    "k-nodes": int,
    "other-nodes": int,
    "a-nodes": int,
    "restarts": int,
}
# run-level spellings of model parameters
ALIASES = {"n-periods": ("time", "N")}

FAST = {"N": 40, "k-nodes": 5, "other-nodes": 3, "a-nodes": 5, "trajectories": 200}


class StageError(RuntimeError):
    def __init__(self, stage: str, cause: BaseException):
        super().__init__(f"stage '{stage}' failed: {cause}")
        self.stage = stage


@dataclass
class RunSettings:
    """Resolved configuration of one pipeline run."""

    params: ModelParams = field(default_factory=ModelParams)
    scenario: str = "A1"
    seed: int = 0
    trajectories: int = 1000
    report_periods: int | None = None
    k_nodes: int = 9
    other_nodes: int = 5
    a_nodes: int = 9
    restarts: int = 5

    @property
    def periods(self) -> int:
        rp = self.params.N if self.report_periods is None else self.report_periods
        return min(rp, self.params.N)

    def to_config(self) -> configparser.ConfigParser:
        cp = params_to_config(self.params)
        cp[RUN_SECTION] = {
            "scenario": self.scenario, "seed": str(self.seed),
            "trajectories": str(self.trajectories),
            "report-periods": str(self.periods),
            "k-nodes": str(self.k_nodes), "other-nodes": str(self.other_nodes),
            "a-nodes": str(self.a_nodes), "restarts": str(self.restarts),
        }
        return cp

    def config_text(self) -> str:
        buf = io.StringIO()
        self.to_config().write(buf)
        return buf.getvalue()

    def config_hash(self) -> str:
        return hashlib.sha256(self.config_text().encode("utf-8")).hexdigest()


@dataclass
class RunManifest:
    config_hash: str
    scenario: str
    params: dict
    settings: dict
    timings: dict
    files: dict
    version: str = __version__
    fallbacks: int = 0

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True)


# -- configuration -------------------------------------------------------------

def _new_parser() -> configparser.ConfigParser:
    cp = configparser.ConfigParser()
    cp.optionxform = str
    return cp


def _locate_key(key: str) -> tuple[str, str]:
    """Map an override key (``section.key``, a bare parameter name, a run key
    or an alias) to its ``(section, key)`` slot."""
    if "." in key:
        section, name = key.split(".", 1)
        if section == RUN_SECTION and name in RUN_KEYS:
            return section, name
        if section in SECTIONS and name in SECTIONS[section]:
            return section, name
        raise ValueError(f"unknown configuration key {key!r}")
    if key in ALIASES:
        return ALIASES[key]
    if key in RUN_KEYS:
        return RUN_SECTION, key
    for section, names in SECTIONS.items():
        if key in names:
            return section, key
    raise ValueError(f"unknown configuration key {key!r}")


def _parse_override(text: str) -> tuple[str, str]:
    if "=" not in text:
        raise ValueError(f"override {text!r} is not of the form key=value")
    key, value = text.split("=", 1)
    key, value = key.strip(), value.strip()
    if not key:
        raise ValueError(f"override {text!r} has an empty key")
    return key, value


def resolve_settings(config_path=None, fast: bool = False, overrides=(), **flags) -> RunSettings:
    """Combine defaults, config file, ``--fast``, flags and overrides.

    ``flags`` holds the dedicated command line options (``scenario``,
    ``seed``, ``trajectories``); None values are ignored.  Every bad key or
    value raises ``ValueError`` naming it.
    """
    cp = RunSettings().to_config()
    cp.remove_option(RUN_SECTION, "report-periods")
    if config_path is not None:
        user = _new_parser()
        with open(config_path, encoding="utf-8") as fh:
            user.read_file(fh)
        for section in user.sections():
            if section != RUN_SECTION and section not in SECTIONS:
                raise ValueError(f"unknown configuration section [{section}]")
            for key, value in user.items(section):
                if section == RUN_SECTION and key in ALIASES:
                    slot = ALIASES[key]
                else:
                    slot = _locate_key(f"{section}.{key}")
                cp[slot[0]][slot[1]] = value
    if fast:
        cp["time"]["N"] = str(FAST["N"])
        for key in ("k-nodes", "other-nodes", "a-nodes", "trajectories"):
            cp[RUN_SECTION][key] = str(FAST[key])
    for key, value in flags.items():
        if value is not None:
            cp[RUN_SECTION][key] = str(value)
    for text in overrides:
        key, value = _parse_override(text)
        section, name = _locate_key(key)
        cp[section][name] = value

    try:
        params = params_from_config(cp)
    except (TypeError, ValueError) as exc:
        raise ValueError(f"invalid model parameters: {exc}") from None
    run_values = {}
    for key, kind in RUN_KEYS.items():
        if not cp.has_option(RUN_SECTION, key):
            continue
        text = cp[RUN_SECTION][key]
        try:
            run_values[key.replace("-", "_")] = kind(text)
        except ValueError:
            raise ValueError(f"invalid value for {key!r}: {text!r}") from None
    settings = RunSettings(params=params, **run_values)
    _validate(settings)
    return settings


def _validate(s: RunSettings) -> None:
    if s.scenario not in SCENARIOS:
        raise ValueError(f"invalid value for 'scenario': {s.scenario!r}; "
                         f"choose from {sorted(SCENARIOS)}")
    if s.seed < 0:
        raise ValueError("invalid value for 'seed': must be non-negative")
    if s.trajectories < 1:
        raise ValueError("invalid value for 'trajectories': need at least one")
    if s.report_periods is not None and s.report_periods < 1:
        raise ValueError("invalid value for 'report-periods': need at least one period")
    for key in ("k_nodes", "other_nodes", "a_nodes"):
        if getattr(s, key) < 2:
            raise ValueError(f"invalid value for {key.replace('_', '-')!r}: need at least 2 nodes")
    if s.restarts < 1:
        raise ValueError("invalid value for 'restarts': need at least one")


# -- pipeline --------------------------------------------------------------------

def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _write_combined_bands(path, bands, reference_series, periods) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        header = ["t"]
        for var in OUTPUT_VARIABLES:
            header += [f"{var}_q025", f"{var}_mean", f"{var}_q975", f"{var}_deterministic"]
        w.writerow(header)
        for t in range(periods + 1):
            row = [t]
            for var in OUTPUT_VARIABLES:
                b = bands[var]
                row += [repr(float(b[0.025][t])), repr(float(b["mean"][t])),
                        repr(float(b[0.975][t])), repr(float(reference_series[var][t]))]
            w.writerow(row)


def run(settings: RunSettings, out_dir, svg: bool = False) -> RunManifest:
    """Execute the pipeline and write all outputs below ``out_dir``.

    Raises
    ------
    StageError
        Naming the stage that failed.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    params = settings.params
    cfg = scenario(settings.scenario, trajectories=settings.trajectories, seed=settings.seed)
    timings = {}
    files = []

    def stage(name, fn):
        t0 = time.perf_counter()
        log.info("stage %s", name)
        try:
            result = fn()
        except Exception as exc:  # reported with the stage name
            raise StageError(name, exc) from exc
        timings[name] = round(time.perf_counter() - t0, 3)
        return result

    periods = settings.periods
    paths = stage("paths", lambda: build_exogenous_paths(params))
    ref = stage("reference", lambda: solve_deterministic(params, restarts=settings.restarts))
    value = policy = grid = None
    if cfg.policy == STOCHASTIC_OPTIMAL:
        grid = stage("grid", lambda: build_grid(grid_ranges_from_reference(ref), params, cfg.shock,
                                                 n_K=settings.k_nodes, n_other=settings.other_nodes,
                                                 n_A=settings.a_nodes))
        value, policy = stage("backward_induction",
                              lambda: backward_induction(grid, paths, params, cfg.shock))
        trajs = stage("simulation", lambda: simulate_trajectories(
            cfg, policy, value, grid, paths, params, reference=ref, horizon=periods))
    else:
        trajs = stage("simulation", lambda: simulate_trajectories(
            cfg, ref, None, None, paths, params, horizon=periods))
    bands = stage("bands", lambda: quantile_bands(trajs))

    def write():
        (out / "config.ini").write_text(settings.config_text(), encoding="utf-8")
        files.append("config.ini")
        write_reference_csv(ref, out / "reference.csv", periods=periods)
        files.append("reference.csv")
        write_trajectories_csv(out / "trajectories.csv", settings.scenario, trajs, periods=periods)
        files.append("trajectories.csv")
        ser = ref.series()
        _write_combined_bands(out / "bands.csv", bands, ser, periods)
        files.append("bands.csv")
        for var in OUTPUT_VARIABLES:
            name = f"band_{var}.csv"
            write_band_csv(out / name, bands[var], ser[var], periods)
            files.append(name)

    stage("write_csv", write)
    if svg:
        def charts():
            for var in OUTPUT_VARIABLES:
                name = f"fan_{var}.svg"
                render_fan_chart(out / f"band_{var}.csv", var, out / name,
                                 start_year=params.start_year, step_years=params.Delta)
                files.append(name)
        stage("svg", charts)

    manifest = RunManifest(
        config_hash=settings.config_hash(),
        scenario=settings.scenario,
        params=asdict(params),
        settings={"seed": settings.seed, "trajectories": settings.trajectories,
                  "report_periods": periods, "k_nodes": settings.k_nodes,
                  "other_nodes": settings.other_nodes, "a_nodes": settings.a_nodes,
                  "restarts": settings.restarts},
        timings=timings,
        files={name: _sha256(out / name) for name in files},
        fallbacks=int(sum(tr.fallbacks for tr in trajs)),
    )
    (out / "manifest.json").write_text(manifest.to_json() + "\n", encoding="utf-8")
    return manifest


# -- fan charts --------------------------------------------------------------------

_BAND_KEYS = ("q025", "mean", "q975", "deterministic")


def _read_band(path, variable):
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ValueError(f"band file {path} is empty")
    header = rows[0]
    prefixed = [f"{variable}_{k}" for k in _BAND_KEYS]
    if all(c in header for c in prefixed):
        cols = prefixed
    elif all(c in header for c in _BAND_KEYS) and not any("_" in c for c in header[1:]):
        cols = list(_BAND_KEYS)
    else:
        available = sorted({c.rsplit("_", 1)[0] for c in header if c != "t"})
        raise ValueError(f"variable {variable!r} not found in {path}; available columns: "
                         f"{', '.join(header)} (variables: {', '.join(available)})")
    if "t" not in header:
        raise ValueError(f"band file {path} has no 't' column; available columns: {', '.join(header)}")
    data = np.array([[float(r[header.index(c)]) for c in ["t", *cols]] for r in rows[1:]])
    if data.size == 0:
        raise ValueError(f"band file {path} has no data rows")
    return data[:, 0], data[:, 1], data[:, 2], data[:, 3], data[:, 4]


def render_fan_chart(band_file, variable: str, output_path, start_year: int = 2015,
                     step_years: float = 5.0, width: int = 640, height: int = 400) -> Path:
    """Draw a static SVG fan chart from a band file.

    The shaded polygon spans the 2.5% and 97.5% quantiles, the solid line is
    the Monte Carlo mean and the dashed line the deterministic reference.
    The time axis has one tick per period (``step_years`` years).  Accepts
    either a per-variable band file (columns t, q025, mean, q975,
    deterministic) or the combined file with ``VAR_``-prefixed columns.
    """
    t, lo, mean, hi, det = _read_band(band_file, variable)
    years = start_year + step_years * t
    ml, mr, mt, mb = 70, 20, 30, 45
    pw, ph = width - ml - mr, height - mt - mb
    ymin = float(min(lo.min(), det.min(), mean.min()))
    ymax = float(max(hi.max(), det.max(), mean.max()))
    if ymax - ymin < 1e-12 * max(1.0, abs(ymax)):
        # flat series: open a small window around it
        ymin, ymax = ymin - 0.01 * max(1.0, abs(ymin)), ymax + 0.01 * max(1.0, abs(ymax))
    pad = 0.05 * (ymax - ymin)
    ymin, ymax = ymin - pad, ymax + pad
    x0 = float(years[0])
    x1 = float(years[-1]) if len(years) > 1 else x0 + step_years

    def X(v):
        return ml + (v - x0) / (x1 - x0) * pw

    def Y(v):
        return mt + (ymax - v) / (ymax - ymin) * ph

    def pts(xs, ys):
        return " ".join(f"{X(a):.2f},{Y(b):.2f}" for a, b in zip(xs, ys))

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
        f'<rect x="0" y="0" width="{width}" height="{height}" fill="white"/>',
        f'<text x="{width / 2:.1f}" y="18" text-anchor="middle" font-family="sans-serif" '
        f'font-size="14">{variable}</text>',
        f'<polygon points="{pts(years, hi)} {pts(years[::-1], lo[::-1])}" '
        f'fill="#b0b0b0" fill-opacity="0.7" stroke="none"/>',
        f'<polyline points="{pts(years, mean)}" fill="none" stroke="#404040" stroke-width="1"/>',
        f'<polyline points="{pts(years, det)}" fill="none" stroke="black" stroke-width="1.5" '
        f'stroke-dasharray="6,4"/>',
        f'<line x1="{ml}" y1="{mt + ph}" x2="{ml + pw}" y2="{mt + ph}" stroke="black"/>',
        f'<line x1="{ml}" y1="{mt}" x2="{ml}" y2="{mt + ph}" stroke="black"/>',
    ]
    label_every = max(1, int(round(len(years) / 10)))
    for i, yr in enumerate(years):
        x = X(yr)
        tick = 6 if i % label_every == 0 else 3
        parts.append(f'<line x1="{x:.2f}" y1="{mt + ph}" x2="{x:.2f}" y2="{mt + ph + tick}" stroke="black"/>')
        if i % label_every == 0:
            parts.append(f'<text x="{x:.2f}" y="{mt + ph + 20}" text-anchor="middle" '
                         f'font-family="sans-serif" font-size="10">{yr:g}</text>')
    for v in np.linspace(ymin + pad, ymax - pad, 5):
        y = Y(v)
        parts.append(f'<line x1="{ml - 5}" y1="{y:.2f}" x2="{ml}" y2="{y:.2f}" stroke="black"/>')
        parts.append(f'<text x="{ml - 8}" y="{y + 3:.2f}" text-anchor="end" font-family="sans-serif" '
                     f'font-size="10">{v:.4g}</text>')
    parts.append("</svg>")
    path = Path(output_path)
    path.write_text("\n".join(parts) + "\n", encoding="utf-8")
    return path


# -- entry point --------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="stochdice", description="Stochastic DICE solver and simulator")
    sub = ap.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="solve and simulate one scenario")
    r.add_argument("--config", metavar="PATH", help="configuration file (INI)")
    r.add_argument("--scenario", choices=sorted(SCENARIOS))
    r.add_argument("--seed", type=int, metavar="U64")
    r.add_argument("--trajectories", type=int, metavar="M")
    r.add_argument("--fast", action="store_true", help="reduced resolution: N=40, 5 K nodes, 3 others, M=200")
    r.add_argument("--out", default="run", metavar="DIR", help="output directory (default: ./run)")
    r.add_argument("--svg", action="store_true", help="also write one SVG fan chart per variable")
    r.add_argument("--set", action="append", default=[], metavar="KEY=VALUE", dest="overrides")
    r.add_argument("-v", "--verbose", action="store_true")
    r.add_argument("extra", nargs="*", metavar="KEY=VALUE", help="further overrides")
    f = sub.add_parser("fan", help="render a fan chart from a band file")
    f.add_argument("band_file")
    f.add_argument("variable")
    f.add_argument("output")
    f.add_argument("--start-year", type=int, default=2015)
    f.add_argument("--step-years", type=float, default=5.0)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "fan":
        try:
            render_fan_chart(args.band_file, args.variable, args.output,
                             start_year=args.start_year, step_years=args.step_years)
        except (OSError, ValueError) as exc:
            print(f"error: {exc}", file=sys.stderr)
            return 2
        return 0
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(asctime)s %(name)s %(message)s")
    try:
        settings = resolve_settings(args.config, fast=args.fast,
                                    overrides=[*args.overrides, *args.extra],
                                    scenario=args.scenario, seed=args.seed,
                                    trajectories=args.trajectories)
    except (OSError, ValueError, configparser.Error) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    try:
        manifest = run(settings, args.out, svg=args.svg)
    except StageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(f"wrote {len(manifest.files) + 1} files to {args.out} "
          f"(config {manifest.config_hash[:12]})")
    return 0
