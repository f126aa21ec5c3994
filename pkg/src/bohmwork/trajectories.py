"""Born-rule sampling and Bohmian trajectory integration.

Trajectories are integrated in batches: all samples share the same time
grid, so each field evaluation interpolates the snapshot stack once in time
and then gathers a four-point cubic stencil per sample.  Work is accumulated
from the power

    P = dH/dt|_(x, p) + dV_Q/dt|_x = -x f1'(t) - p f2'(t) + dV_Q/dt

with p = m (v + f2).  The quantum potential term is what makes the
integrated power equal the change in Bohm energy E = H + V_Q along a single
trajectory; it averages to zero over the Born ensemble.
"""
from __future__ import annotations

import csv
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

import numpy as np
from scipy import stats

from .errors import (DegenerateStateError, EnsembleError, NodeCollisionError, OutOfDomainError,
                     PlanError)
from .fields import Grid1D, HamiltonianSpec
from .propagator import SnapshotSeries

WORK_TOL = 1e-3

OK, OUT_OF_DOMAIN, NODE_COLLISION = 0, 1, 2
_STATUS_NAMES = {OUT_OF_DOMAIN: "out_of_domain", NODE_COLLISION: "node_collision"}


def rng_for(seed, *keys) -> np.random.Generator:
    """Independent generator for (seed, *keys), stable under any schedule."""
    return np.random.default_rng(np.random.SeedSequence([int(seed), *map(int, keys)]))


def _nodes_and_density(density, grid):
    density = np.asarray(density, dtype=float)
    if isinstance(grid, Grid1D):
        # close the periodic cell so the CDF spans [x_min, x_max]
        x = np.append(grid.x, grid.x_max)
        density = np.append(density, density[0])
    else:
        x = np.asarray(grid, dtype=float)
    if x.shape != density.shape:
        raise ValueError("density and nodes differ in length")
    return x, density


def density_cdf(density, grid):
    """Nodes and normalized cumulative trapezoid of ``density`` over them."""
    x, density = _nodes_and_density(density, grid)
    if np.any(density < 0):
        raise ValueError("density must be non-negative")
    cdf = np.concatenate([[0.0], np.cumsum(0.5 * (density[1:] + density[:-1]) * np.diff(x))])
    if not cdf[-1] > 0:
        raise DegenerateStateError("density vanishes everywhere")
    return x, cdf / cdf[-1]


def inverse_cdf(u, density, grid) -> np.ndarray:
    x, cdf = density_cdf(density, grid)
    return np.interp(u, cdf, x)


def sample_initial_positions(density, grid, n: int, seed=0) -> np.ndarray:
    """``n`` draws from the grid density by inverse-CDF sampling.

    ``seed`` may be an int or a Generator.  The CDF is linear between
    nodes, so samples are confined to the node range.
    """
    rng = seed if isinstance(seed, np.random.Generator) else rng_for(seed)
    return inverse_cdf(rng.random(n), density, grid)


@dataclass
class Trajectory:
    x0: float
    times: np.ndarray
    positions: np.ndarray
    energies: np.ndarray
    work_integral: float
    work_endpoint: float
    weight: float = 1.0
    work_partial: np.ndarray | None = None
    index: int = 0

    @property
    def work_gap(self) -> float:
        return abs(self.work_integral - self.work_endpoint)


@dataclass(frozen=True)
class TrajectorySpec:
    source: object  # SnapshotSeries or an analytic field source
    n_samples: int
    rng_seed: int = 0
    ode_dt: float | None = None
    record_stride: int = 1
    failure_budget: int = 0

    def __post_init__(self):
        if self.n_samples < 1:
            raise PlanError("n_samples must be at least 1")
        if self.record_stride < 1:
            raise PlanError("record_stride must be at least 1")
        _n_ode_steps(self.source, self.dt)

    @property
    def dt(self) -> float:
        return _default_dt(self.source) if self.ode_dt is None else self.ode_dt


def field_source(source):
    if isinstance(source, SnapshotSeries):
        return FieldInterpolator(source)
    return source


def _default_dt(source) -> float:
    if isinstance(source, SnapshotSeries):
        return source.spacing
    return source.default_dt


def _n_ode_steps(series, dt: float) -> int:
    if not isinstance(series, SnapshotSeries):
        span = series.t_end - series.t_start
        n = round(span / dt)
        if not dt > 0 or abs(n * dt - span) > 1e-9 * span:
            raise PlanError("ode_dt must divide the protocol duration")
        return n
    spacing = series.spacing
    if not 0 < dt <= spacing * (1 + 1e-12):
        raise PlanError(f"ode_dt={dt:.4g} must be positive and at most the snapshot spacing {spacing:.4g}")
    if spacing > 4 * dt * (1 + 1e-12):
        raise PlanError("snapshot spacing must not exceed 4 * ode_dt")
    span = series.t_end - series.t_start
    n = round(span / dt)
    if abs(n * dt - span) > 1e-9 * span:
        raise PlanError("ode_dt must divide the protocol duration")
    return n


class FieldInterpolator:
    """Fields of a snapshot series at arbitrary (x, t).

    Analytic sources expose the same surface (``grid``, ``t_start``,
    ``t_end``, ``hamiltonian``, ``velocity``, ``energy``, ``power``) and can
    be passed wherever a series is accepted.

    Linear in time between snapshots, four-point Lagrange cubic in space.
    Where the cubic stencil touches an invalid node but the two bracketing
    nodes are valid, the value falls back to linear interpolation; if a
    bracketing node is invalid the result is NaN.
    """

    def __init__(self, series: SnapshotSeries):
        self.series = series
        self.grid = series.grid
        self.f = series.fields
        self.times = series.times
        self.t_start, self.t_end = series.t_start, series.t_end
        self.h = self.hamiltonian = series.hamiltonian

    def _rows(self, name, t):
        s = (t - self.times[0]) / self.series.spacing
        j = min(max(int(math.floor(s + 1e-9)), 0), len(self.times) - 2)
        frac = s - j
        stack = self.f[name]
        if abs(frac) < 1e-9:
            return stack[j]
        if abs(frac - 1) < 1e-9:
            return stack[j + 1]
        return (1 - frac) * stack[j] + frac * stack[j + 1]

    def _stencil(self, x):
        g = self.grid
        u = (x - g.x_min) / g.dx
        i = np.floor(u).astype(np.int64)
        r = u - i
        idx = (i[:, None] + np.arange(-1, 3)[None, :]) % g.n_points
        w = np.stack([
            -r * (r - 1) * (r - 2) / 6,
            (r + 1) * (r - 1) * (r - 2) / 2,
            -(r + 1) * r * (r - 2) / 2,
            (r + 1) * r * (r - 1) / 6,
        ], axis=1)
        return idx, w, r

    @staticmethod
    def _apply(row, idx, w, r):
        vals = row[idx]
        out = np.einsum("ij,ij->i", vals, w)
        bad = ~np.isfinite(out)
        if bad.any():
            lin = (1 - r[bad]) * vals[bad, 1] + r[bad] * vals[bad, 2]
            out[bad] = lin
        return out

    def sample(self, names, x, t):
        x = np.asarray(x, dtype=float)
        idx, w, r = self._stencil(x)
        return [self._apply(self._rows(n, t), idx, w, r) for n in names]

    def velocity(self, x, t):
        return self.sample(["velocity"], x, t)[0]

    def energy(self, x, t):
        return self.sample(["local_energy"], x, t)[0]

    def power(self, x, t, v):
        """Integrand -x f1' - p f2' + dV_Q/dt with p = m (v + f2)."""
        h = self.h
        rate = self.sample(["quantum_potential_rate"], x, t)[0]
        p = h.mass * (v + h.f2(t))
        return -x * h.df1(t) - p * h.df2(t) + rate


@dataclass
class BatchResult:
    x0: np.ndarray
    times: np.ndarray
    positions: np.ndarray  # (n_records, n_samples)
    energies: np.ndarray
    work_partial: np.ndarray
    work_integral: np.ndarray
    work_endpoint: np.ndarray
    status: np.ndarray
    fail_time: np.ndarray

    @property
    def ok(self) -> np.ndarray:
        return self.status == OK

    @property
    def work_gap(self) -> np.ndarray:
        return np.abs(self.work_integral - self.work_endpoint)

    def failures(self) -> dict:
        out = {}
        for i in np.flatnonzero(self.status != OK):
            out[int(i)] = {"reason": _STATUS_NAMES[int(self.status[i])],
                           "x0": float(self.x0[i]), "t": float(self.fail_time[i])}
        return out

    def trajectory(self, i: int, weight: float = 1.0) -> Trajectory:
        return Trajectory(float(self.x0[i]), self.times, self.positions[:, i].copy(),
                          self.energies[:, i].copy(), float(self.work_integral[i]),
                          float(self.work_endpoint[i]), weight, self.work_partial[:, i].copy(), i)


def integrate_batch(x0, series, ode_dt: float | None = None,
                    record_stride: int = 1, interp=None) -> BatchResult:
    """RK4 for every x0 at once, with Simpson accumulation of the power.

    The midpoint position for Simpson's rule comes from the cubic Hermite
    interpolant through the step's endpoints and velocities.  Samples that
    leave the grid or hit an invalid velocity are frozen and flagged.
    """
    x = np.array(x0, dtype=float, ndmin=1)
    x_init = x.copy()
    dt = _default_dt(series) if ode_dt is None else ode_dt
    n_steps = _n_ode_steps(series, dt)
    it = interp or field_source(series)
    grid = series.grid
    t0 = series.t_start
    h = (series.t_end - t0) / n_steps
    n = x.size
    status = np.zeros(n, dtype=np.int8)
    fail_time = np.full(n, np.nan)
    lo, hi = grid.x_min, grid.x_max

    def guard(pos, t):
        out = (pos < lo) | (pos >= hi) | ~np.isfinite(pos)
        new = out & (status == OK)
        status[new] = OUT_OF_DOMAIN
        fail_time[new] = t
        return np.where(out, np.clip(np.nan_to_num(pos, nan=lo), lo, hi - grid.dx), pos)

    def vel(pos, t):
        v = it.velocity(pos, t)
        bad = ~np.isfinite(v)
        new = bad & (status == OK)
        status[new] = NODE_COLLISION
        fail_time[new] = t
        v[bad] = 0.0
        return v

    rec_steps = list(range(0, n_steps + 1, record_stride))
    if rec_steps[-1] != n_steps:
        rec_steps.append(n_steps)
    n_rec = len(rec_steps)
    times = np.empty(n_rec)
    positions = np.empty((n_rec, n))
    energies = np.empty((n_rec, n))
    work_partial = np.empty((n_rec, n))

    x = guard(x, t0)
    work = np.zeros(n)
    k1 = vel(x, t0)
    p_start = it.power(x, t0, k1)
    r = 0
    for k in range(n_steps + 1):
        t = t0 + k * h
        if k == rec_steps[r]:
            times[r] = t
            positions[r] = x
            energies[r] = it.energy(x, t)
            work_partial[r] = work
            r += 1
        if k == n_steps:
            break
        tm = t + 0.5 * h
        k2 = vel(guard(x + 0.5 * h * k1, tm), tm)
        k3 = vel(guard(x + 0.5 * h * k2, tm), tm)
        k4 = vel(guard(x + h * k3, t + h), t + h)
        xn = guard(x + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4), t + h)
        v_end = vel(xn, t + h)
        xm = guard(0.5 * (x + xn) + h / 8 * (k1 - v_end), tm)
        vm = vel(xm, tm)
        p_mid = it.power(xm, tm, vm)
        p_end = it.power(xn, t + h, v_end)
        work = work + h / 6 * (p_start + 4 * p_mid + p_end)
        frozen = status != OK
        if frozen.any():
            xn = np.where(frozen, x, xn)
            work = np.where(frozen, np.nan, work)
        x, k1, p_start = xn, v_end, p_end
    work_endpoint = energies[-1] - energies[0]
    bad = status != OK
    work_endpoint[bad] = np.nan
    return BatchResult(x_init, times, positions, energies, work_partial, work.copy(),
                       work_endpoint, status, fail_time)


def integrate_trajectory(x0: float, source, h: HamiltonianSpec | None = None,
                         ode_dt: float | None = None, record_stride: int = 1) -> Trajectory:
    if h is not None and h is not source.hamiltonian and isinstance(source, SnapshotSeries):
        source = replace(source, hamiltonian=h)
    res = integrate_batch([x0], source, ode_dt, record_stride)
    if res.status[0] == OUT_OF_DOMAIN:
        raise OutOfDomainError(f"trajectory from x0={x0} left the grid at t={res.fail_time[0]:.6g}")
    if res.status[0] == NODE_COLLISION:
        raise NodeCollisionError(
            f"trajectory from x0={x0} met an invalid velocity at t={res.fail_time[0]:.6g}")
    return res.trajectory(0)


def run_batches(x0, series, ode_dt=None, record_stride: int = 1,
                workers: int = 1, chunk: int = 4096) -> BatchResult:
    """:func:`integrate_batch` over chunks of ``x0``, optionally threaded.

    Each sample is integrated by the same elementwise arithmetic whatever
    chunk it lands in, so results do not depend on ``workers``.
    """
    x0 = np.asarray(x0, dtype=float)
    it = field_source(series)
    pieces = [x0[i:i + chunk] for i in range(0, max(len(x0), 1), chunk)]

    def job(piece):
        return integrate_batch(piece, series, ode_dt, record_stride, it)

    if workers > 1 and len(pieces) > 1:
        with ThreadPoolExecutor(workers) as pool:
            parts = list(pool.map(job, pieces))
    else:
        parts = [job(p) for p in pieces]
    if len(parts) == 1:
        return parts[0]
    cat0 = np.concatenate
    return BatchResult(
        cat0([p.x0 for p in parts]), parts[0].times,
        np.hstack([p.positions for p in parts]), np.hstack([p.energies for p in parts]),
        np.hstack([p.work_partial for p in parts]), cat0([p.work_integral for p in parts]),
        cat0([p.work_endpoint for p in parts]), cat0([p.status for p in parts]),
        cat0([p.fail_time for p in parts]))


def initial_density(source) -> np.ndarray:
    """Born density of a source at its start time, on its grid."""
    if isinstance(source, SnapshotSeries):
        return np.abs(source.states[0]) ** 2
    return source.density(source.grid.x, source.t_start)


def check_failures(res: BatchResult, budget: int) -> dict:
    failures = res.failures()
    if len(failures) > budget:
        first = sorted(failures.items())[:5]
        raise EnsembleError(f"{len(failures)} of {len(res.x0)} trajectories failed "
                            f"(budget {budget}); first: {first}", failures)
    return failures


def run_ensemble(spec: TrajectorySpec, h: HamiltonianSpec | None = None,
                 workers: int = 1) -> list[Trajectory]:
    """Sample x0 from the first snapshot and integrate every member.

    Failed members are dropped if they fit in ``spec.failure_budget``,
    otherwise :class:`EnsembleError` carries the per-index diagnostics.
    """
    series = spec.source
    if h is not None and h is not series.hamiltonian and isinstance(series, SnapshotSeries):
        series = replace(series, hamiltonian=h)
    x0 = sample_initial_positions(initial_density(series), series.grid, spec.n_samples,
                                  spec.rng_seed)
    res = run_batches(x0, series, spec.dt, spec.record_stride, workers)
    check_failures(res, spec.failure_budget)
    w = 1.0 / int(res.ok.sum())
    return [res.trajectory(i, w) for i in np.flatnonzero(res.ok)]


def equivariance_test(positions, density, grid, n_bins: int | None = None):
    """Chi-square test of ``positions`` against a grid density.

    Bins are equiprobable under the density.  Returns (statistic, p-value).
    """
    positions = np.asarray(positions, dtype=float)
    n = positions.size
    n_bins = n_bins or max(5, min(100, int(round(2 * n ** 0.4))))
    x, cdf = density_cdf(density, grid)
    edges = np.interp(np.linspace(0, 1, n_bins + 1), cdf, x)
    edges[0], edges[-1] = -np.inf, np.inf
    counts, _ = np.histogram(positions, edges)
    res = stats.chisquare(counts, np.full(n_bins, n / n_bins))
    return float(res.statistic), float(res.pvalue)


def write_trajectories_csv(trajectories, path) -> None:
    """One row per recorded point: sample,x0,t,x,E,W_partial."""
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh)
        out.writerow(["sample", "x0", "t", "x", "E", "W_partial"])
        for tr in trajectories:
            wp = tr.work_partial if tr.work_partial is not None else np.full(len(tr.times), np.nan)
            for t, xv, e, w in zip(tr.times, tr.positions, tr.energies, wp):
                out.writerow([tr.index, f"{tr.x0:.17g}", f"{t:.17g}", f"{xv:.17g}",
                              f"{e:.17g}", f"{w:.17g}"])
