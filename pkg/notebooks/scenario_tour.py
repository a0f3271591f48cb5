"""
A short tour of the stochastic DICE solver
==========================================

Solve the deterministic model, then a shocked version by dynamic
programming, and compare Monte Carlo bands against the deterministic path.
Everything runs at a reduced resolution so the script finishes in about a
minute.  Fan charts are written next to the script as SVG files.
"""

from pathlib import Path

import numpy as np

from stochdice import (
    ModelParams, build_exogenous_paths, build_grid, backward_induction,
    grid_ranges_from_reference, quantile_bands, scenario, simulate_trajectories,
    solve_deterministic,
)
from stochdice.cli import render_fan_chart
from stochdice.simulate import write_band_csv

out = Path(__file__).with_name("tour_output")
out.mkdir(exist_ok=True)
np.set_printoptions(precision=3, suppress=True, linewidth=110)

###############################################################################
# The deterministic reference
# ---------------------------
# Forty five-year periods.  The optimizer returns the whole path; the first
# mitigation rate is fixed at 0.03.

params = ModelParams(N=40)
paths = build_exogenous_paths(params)
ref = solve_deterministic(params)
print("gross output in 2015:", round(ref.Y[0], 2))
print("mitigation, every fifth period:", ref.mu[::5])
print("atmospheric temperature:", ref.T[::5, 0])

###############################################################################
# A persistent productivity shock
# -------------------------------
# Scenario B: a 1% annual chance of a stressed period that destroys 5% of
# output and permanently lowers productivity by 5%.  The grid covers a band
# around the reference path.

cfg = scenario("B", trajectories=200, seed=1)
grid = build_grid(grid_ranges_from_reference(ref), params, cfg.shock, n_K=5, n_other=3, n_A=5)
print("nodes per period and regime:", grid.n_cont)
value, policy = backward_induction(grid, paths, params, cfg.shock)

###############################################################################
# Simulated paths
# ---------------
# The first two periods are forced to (normal, stressed), then the regime
# follows the Markov chain.

trajs = simulate_trajectories(cfg, policy, value, grid, paths, params, reference=ref)
bands = quantile_bands(trajs)
for var, det in (("TATM", ref.T[:, 0]), ("CPRICE", ref.P), ("YNET", ref.Q)):
    b = bands[var]
    print(var, "mean minus deterministic at t=10, 20, 30:",
          (b["mean"] - det)[[10, 20, 30]])

###############################################################################
# Fan charts
# ----------

series = ref.series()
for var in ("TATM", "CPRICE", "YNET"):
    band_file = out / f"band_{var}.csv"
    write_band_csv(band_file, bands[var], series[var], params.N)
    render_fan_chart(band_file, var, out / f"fan_{var}.svg")
print("charts in", out)

###############################################################################
# Holding the deterministic policy fixed
# --------------------------------------
# Scenario C applies the reference controls whatever happens.  Mitigation
# and the carbon price are then identical on every path.

fixed = simulate_trajectories(scenario("C", trajectories=200, seed=1), ref, None, None,
                              paths, params)
print("carbon price identical on all paths:",
      all(np.array_equal(tr.P, ref.P) for tr in fixed))
fb = quantile_bands(fixed)
print("mean temperature drop at t=30 with the fixed policy:",
      round(ref.T[30, 0] - fb["TATM"]["mean"][30], 4))
