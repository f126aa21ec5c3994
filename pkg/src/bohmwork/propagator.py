"""Strang split-operator propagation and snapshot series."""
from __future__ import annotations

import json
import warnings
from dataclasses import dataclass
from functools import cached_property
from typing import Callable

import numpy as np
from scipy import fft as sfft

from .errors import PlanError, StepSizeError
from .fields import Grid1D, HamiltonianSpec, WaveFunction, field_arrays

# dt * frequency_scale must not exceed this
STEP_BOUND = 0.05
RENORM_TOL = 1e-10


def _check_dt(h: HamiltonianSpec, dt: float) -> None:
    if not dt > 0:
        raise StepSizeError("time step must be positive")
    if dt * h.frequency_scale > STEP_BOUND:
        raise StepSizeError(
            f"dt={dt:.3g} exceeds {STEP_BOUND}/frequency_scale={STEP_BOUND / h.frequency_scale:.3g}")


def _step_values(values, grid: Grid1D, h: HamiltonianSpec, t: float, dt: float, vx=None):
    tm = t + 0.5 * dt
    k = grid.k
    hbar = h.hbar
    if vx is None:
        vx = h.potential(grid.x)
    half_kin = np.exp(-0.5j * dt / hbar * ((hbar * k) ** 2 / (2 * h.mass) - hbar * k * h.f2(tm)))
    pot = np.exp(-1j * dt / hbar * (vx - grid.x * h.f1(tm)))
    vk = sfft.fft(values) * half_kin
    values = sfft.ifft(vk) * pot
    return sfft.ifft(sfft.fft(values) * half_kin)


def step(psi: WaveFunction, h: HamiltonianSpec, t: float, dt: float) -> WaveFunction:
    """One Strang step from ``t`` to ``t + dt`` with drives taken at the midpoint."""
    _check_dt(h, dt)
    out = _step_values(psi.values, psi.grid, h, t, dt)
    return WaveFunction(psi.grid, out, t + dt)


@dataclass(frozen=True)
class PropagationPlan:
    hamiltonian: HamiltonianSpec
    t_start: float
    t_end: float
    n_steps: int
    snapshot_stride: int = 1

    def __post_init__(self):
        if self.n_steps < 1:
            raise PlanError("n_steps must be at least 1")
        if self.snapshot_stride < 1:
            raise PlanError("snapshot_stride must be at least 1")
        if self.n_steps % self.snapshot_stride:
            raise PlanError("n_steps must be a multiple of snapshot_stride")
        if not self.t_end > self.t_start:
            raise PlanError("t_end must exceed t_start")
        _check_dt(self.hamiltonian, self.dt)

    @property
    def dt(self) -> float:
        return (self.t_end - self.t_start) / self.n_steps

    @property
    def n_snapshots(self) -> int:
        return self.n_steps // self.snapshot_stride + 1


@dataclass(frozen=True)
class SnapshotSeries:
    """Wave function at uniformly spaced times.

    ``states`` has shape (n_snapshots, n_points).  Memory is
    n_points * n_snapshots complex values plus, once :attr:`fields` is
    touched, five real arrays of the same shape.
    """

    grid: Grid1D
    hamiltonian: HamiltonianSpec
    times: np.ndarray
    states: np.ndarray
    method: str = "spectral"
    norm_drift: float = 0.0
    renormalizations: int = 0

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float)
        if times.ndim != 1 or len(times) < 2:
            raise PlanError("a snapshot series needs at least two times")
        if np.any(np.diff(times) <= 0):
            raise PlanError("snapshot times must be strictly increasing")
        object.__setattr__(self, "times", times)

    @property
    def spacing(self) -> float:
        return float(self.times[1] - self.times[0])

    @property
    def t_start(self) -> float:
        return float(self.times[0])

    @property
    def t_end(self) -> float:
        return float(self.times[-1])

    def __len__(self):
        return len(self.times)

    def wavefunction(self, i: int) -> WaveFunction:
        return WaveFunction(self.grid, self.states[i], float(self.times[i]))

    @cached_property
    def fields(self) -> dict:
        """Field stacks plus ``quantum_potential_rate`` (dV_Q/dt at fixed x).

        The rate comes from second-order finite differences across
        snapshots, one-sided at the ends.
        """
        out = {name: np.empty(self.states.shape) for name in
               ("density", "velocity", "quantum_potential", "local_energy", "momentum")}
        chunk = 128
        for lo in range(0, len(self.times), chunk):
            hi = min(lo + chunk, len(self.times))
            f = field_arrays(self.states[lo:hi], self.grid, self.hamiltonian,
                             self.times[lo:hi], self.method)
            for name in out:
                out[name][lo:hi] = f[name]
        vq = out["quantum_potential"]
        out["quantum_potential_rate"] = np.gradient(vq, self.times, axis=0, edge_order=2)
        for arr in out.values():
            arr.setflags(write=False)
        return out

    @classmethod
    def from_function(cls, grid: Grid1D, hamiltonian: HamiltonianSpec, times,
                      psi: Callable[[np.ndarray, float], np.ndarray],
                      method: str = "spectral") -> "SnapshotSeries":
        """Sample an analytic psi(x, t) at ``times`` (each row renormalized)."""
        times = np.asarray(times, dtype=float)
        states = np.empty((len(times), grid.n_points), dtype=complex)
        for i, t in enumerate(times):
            states[i] = WaveFunction.normalized(grid, psi(grid.x, float(t)), float(t)).values
        return cls(grid, hamiltonian, times, states, method)


def propagate(psi0: WaveFunction, plan: PropagationPlan) -> SnapshotSeries:
    if abs(psi0.time - plan.t_start) > 1e-12 * max(1.0, abs(plan.t_start)):
        raise PlanError(f"psi0.time={psi0.time} does not match plan.t_start={plan.t_start}")
    h = plan.hamiltonian
    grid = psi0.grid
    dt = plan.dt
    vx = h.potential(grid.x)
    states = np.empty((plan.n_snapshots, grid.n_points), dtype=complex)
    times = plan.t_start + dt * plan.snapshot_stride * np.arange(plan.n_snapshots)
    times[-1] = plan.t_end
    states[0] = psi0.values
    values = psi0.values
    drift = 0.0
    renorms = 0
    for i in range(plan.n_steps):
        values = _step_values(values, grid, h, plan.t_start + i * dt, dt, vx)
        if (i + 1) % plan.snapshot_stride == 0:
            norm = np.sum(np.abs(values) ** 2) * grid.dx
            drift = max(drift, abs(norm - 1.0))
            if abs(norm - 1.0) > RENORM_TOL:
                values = values / np.sqrt(norm)
                renorms += 1
            states[(i + 1) // plan.snapshot_stride] = values
    if renorms:
        warnings.warn(f"renormalized {renorms} snapshots (max drift {drift:.2e})", RuntimeWarning)
    return SnapshotSeries(grid, h, times, states, norm_drift=drift, renormalizations=renorms)


def write_snapshots(series: SnapshotSeries, path) -> None:
    """JSON header line, then little-endian float64 (re, im) pairs per node."""
    header = {"grid": series.grid.to_dict(), "times": [float(t) for t in series.times]}
    data = np.empty(series.states.shape + (2,), dtype="<f8")
    data[..., 0] = series.states.real
    data[..., 1] = series.states.imag
    with open(path, "wb") as fh:
        fh.write(json.dumps(header).encode() + b"\n")
        fh.write(data.tobytes())


def read_snapshots(path):
    """Returns (grid, times, states) from a :func:`write_snapshots` file."""
    with open(path, "rb") as fh:
        header = json.loads(fh.readline())
        raw = np.frombuffer(fh.read(), dtype="<f8")
    grid = Grid1D(**header["grid"])
    times = np.array(header["times"])
    raw = raw.reshape(len(times), grid.n_points, 2)
    return grid, times, raw[..., 0] + 1j * raw[..., 1]
