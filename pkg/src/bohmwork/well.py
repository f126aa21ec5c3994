"""Two lowest levels of a particle in an infinite square well on [0, L].

The well is undriven, so the superposition simply beats at the Bohr
frequency (E1 - E0)/hbar.  Trajectories oscillate and return to their start
after one full beat period; over a partial period the Bohm energy of a
single trajectory changes even though no external work is done on the
ensemble on average.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import NormalizationError
from .fields import NODE_FLOOR, Grid1D, HamiltonianSpec, WaveFunction
from .propagator import SnapshotSeries


@dataclass(frozen=True)
class TwoLevelWellState:
    L: float = 1.0
    c0: complex = 1 / math.sqrt(2)
    c1: complex = 1 / math.sqrt(2)
    m: float = 1.0
    hbar: float = 1.0

    def __post_init__(self):
        if not (self.L > 0 and self.m > 0 and self.hbar > 0):
            raise ValueError("L, m and hbar must be positive")
        object.__setattr__(self, "c0", complex(self.c0))
        object.__setattr__(self, "c1", complex(self.c1))
        norm = abs(self.c0) ** 2 + abs(self.c1) ** 2
        if abs(norm - 1.0) > 1e-12:
            raise NormalizationError(f"|c0|^2 + |c1|^2 = {norm!r}")

    def energy(self, k: int) -> float:
        return (self.hbar * math.pi * (k + 1)) ** 2 / (2 * self.m * self.L ** 2)

    @property
    def period(self) -> float:
        """Beat period 2 pi hbar/(E1 - E0)."""
        return 2 * math.pi * self.hbar / (self.energy(1) - self.energy(0))

    def hamiltonian(self) -> HamiltonianSpec:
        return HamiltonianSpec(mass=self.m, hbar=self.hbar,
                               frequency_scale=self.energy(1) / self.hbar)

    def default_grid(self, n_points: int = 1024) -> Grid1D:
        return Grid1D(0.0, self.L, n_points)

    def to_dict(self) -> dict:
        return {"L": self.L, "c0": [self.c0.real, self.c0.imag],
                "c1": [self.c1.real, self.c1.imag], "m": self.m, "hbar": self.hbar}


def well_eigenfunction(state: TwoLevelWellState, k: int, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    inside = (x >= 0) & (x <= state.L)
    return np.where(inside, math.sqrt(2 / state.L) * np.sin((k + 1) * math.pi * x / state.L), 0.0)


def well_values(state: TwoLevelWellState, x, t: float = 0.0) -> np.ndarray:
    e0, e1 = state.energy(0), state.energy(1)
    return (state.c0 * np.exp(-1j * e0 * t / state.hbar) * well_eigenfunction(state, 0, x)
            + state.c1 * np.exp(-1j * e1 * t / state.hbar) * well_eigenfunction(state, 1, x))


def two_level_well_wavefunction(state: TwoLevelWellState, t: float = 0.0,
                                grid: Grid1D | None = None) -> WaveFunction:
    """psi(x, t) sampled on ``grid`` (zero outside the well).

    The grid's last node sits one spacing short of x_max, so a grid on
    [0, L) holds the wall value once at x = 0.
    """
    grid = grid or state.default_grid()
    return WaveFunction.normalized(grid, well_values(state, grid.x, t), t)


def well_series(state: TwoLevelWellState, t_end: float | None = None, n_snapshots: int = 1025,
                grid: Grid1D | None = None, method: str = "odd") -> SnapshotSeries:
    """Exact snapshots over [0, t_end] (default one beat period).

    The default derivative uses the odd extension across the walls, where
    the sine series is smooth; the plain periodic spectral derivative would
    ring at the wall kink.  ``"fd4"`` is the local alternative.
    """
    grid = grid or state.default_grid()
    t_end = state.period if t_end is None else t_end
    times = np.linspace(0.0, t_end, n_snapshots)
    return SnapshotSeries.from_function(grid, state.hamiltonian(), times,
                                        lambda x, t: well_values(state, x, t), method=method)


class WellFields:
    """Closed-form Bohmian fields of the two-level superposition.

    Usable directly as a trajectory source, so the integrator is not limited
    by snapshot resolution when trajectories skim the transient node.
    Time derivatives follow from d(psi)/dt = (i hbar/2m) psi''.
    """

    def __init__(self, state: TwoLevelWellState, t_end: float | None = None,
                 n_points: int = 1024, n_steps: int = 16384):
        self.state = state
        self.grid = state.default_grid(n_points)
        self.t_start = 0.0
        self.t_end = state.period if t_end is None else t_end
        self.hamiltonian = state.hamiltonian()
        self.default_dt = self.t_end / n_steps
        self._floor = NODE_FLOOR * (abs(state.c0) + abs(state.c1)) ** 2 * 2 / state.L

    def _derivs(self, x, t):
        """psi and its first four x-derivatives."""
        st = self.state
        x = np.asarray(x, dtype=float)
        out = [np.zeros(x.shape, dtype=complex) for _ in range(5)]
        for k, c in ((0, st.c0), (1, st.c1)):
            q = (k + 1) * math.pi / st.L
            amp = c * np.exp(-1j * st.energy(k) * t / st.hbar) * math.sqrt(2 / st.L)
            s, co = np.sin(q * x), np.cos(q * x)
            for d, base in enumerate((s, q * co, -q ** 2 * s, -q ** 3 * co, q ** 4 * s)):
                out[d] += amp * base
        return out

    def density(self, x, t):
        return np.abs(self._derivs(x, t)[0]) ** 2

    def _ratios(self, x, t):
        p0, p1, p2, p3, p4 = self._derivs(x, t)
        bad = np.abs(p0) ** 2 < self._floor
        p0 = np.where(bad, 1.0, p0)
        return p0, p1, p2, p3, p4, bad

    def velocity(self, x, t):
        p0, p1, _, _, _, bad = self._ratios(x, t)
        v = self.state.hbar / self.state.m * (p1 / p0).imag
        return np.where(bad, np.nan, v)

    def energy(self, x, t):
        st = self.state
        p0, _, p2, _, _, bad = self._ratios(x, t)
        e = -(st.hbar ** 2) / (2 * st.m) * (p2 / p0).real
        return np.where(bad, np.nan, e)

    def power(self, x, t, v=None):
        """dV_Q/dt at fixed x; the well is undriven."""
        st = self.state
        p0, p1, p2, p3, p4, bad = self._ratios(x, t)
        k = 1j * st.hbar / (2 * st.m)
        u = p1 / p0
        du = (k * p3 * p0 - p1 * k * p2) / p0 ** 2
        dw = (k * p4 * p0 - p2 * k * p2) / p0 ** 2
        rate = -(st.hbar ** 2) / (2 * st.m) * (dw.real + 2 * u.imag * du.imag)
        return np.where(bad, np.nan, rate)
