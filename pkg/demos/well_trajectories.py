"""Bohmian trajectories in an undriven two-level infinite well.

Integrates trajectories through the closed-form fields, writes an SVG fan of
paths and checks that every path returns to its start after one beat period with
zero net work.
"""
import sys

import numpy as np

from bohmwork.svg import trajectories_svg
from bohmwork.trajectories import run_batches
from bohmwork.well import TwoLevelWellState, WellFields

state = TwoLevelWellState()
fields = WellFields(state)
x0 = np.linspace(0.05, 0.95, 19)
res = run_batches(x0, fields, record_stride=64)
back = np.max(np.abs(res.positions[-1] - x0))
print(f"beat period {state.period:.4f}; max |x(T) - x0| = {back:.2e}")
bad = np.flatnonzero(res.work_gap > 1e-3)
print(f"work over the full period: median |W| = {np.median(np.abs(res.work_integral)):.1e}; "
      f"{bad.size} of {x0.size} paths have |W_int - W_end| > 1e-3")
for i in bad:
    # these skim the transient node, where the quantum potential spikes; a smaller ode_dt fixes them
    print(f"  x0 = {x0[i]:.3f}: W_int = {res.work_integral[i]:.3g}, W_end = {res.work_endpoint[i]:.3g}")
out = sys.argv[1] if len(sys.argv) > 1 else "well_trajectories.svg"
with open(out, "w") as fh:
    fh.write(trajectories_svg([(res.times, res.positions[:, i]) for i in range(x0.size)], "Two-level well"))
print(f"wrote {out}")
