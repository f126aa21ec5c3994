"""Grid wave functions and the Bohmian fields extracted from them.

Every field is computed from psi and its spatial derivatives directly, never
from an unwrapped phase: displaced number states with n >= 1 have density
nodes across which the phase jumps by pi.  The identities used are

    p      = hbar * Im(psi'/psi)
    V_Q    = -hbar^2/(2m) * [Re(psi''/psi) + Im(psi'/psi)^2]
    E      = Re[(H psi)/psi]

which agree with the polar-form definitions wherever the density is nonzero.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Callable

import numpy as np
from scipy import fft as sfft

from .errors import DegenerateStateError, GridError, NormalizationError

NORM_TOL = 1e-8
NODE_FLOOR = 1e-12

Drive = Callable[[float], float]


def _zero(t: float) -> float:
    return 0.0


def _zero_potential(x: np.ndarray) -> np.ndarray:
    return np.zeros_like(x)


@dataclass(frozen=True)
class Grid1D:
    """Uniform periodic grid; node i sits at ``x_min + i*dx``."""

    x_min: float
    x_max: float
    n_points: int

    def __post_init__(self):
        n = self.n_points
        if n < 16 or n & (n - 1):
            raise GridError(f"n_points must be a power of two >= 16, got {n}")
        if not self.x_max > self.x_min:
            raise GridError("x_max must exceed x_min")

    @property
    def length(self) -> float:
        return self.x_max - self.x_min

    @property
    def dx(self) -> float:
        return self.length / self.n_points

    @property
    def dk(self) -> float:
        return 2.0 * np.pi / (self.n_points * self.dx)

    @cached_property
    def x(self) -> np.ndarray:
        x = self.x_min + self.dx * np.arange(self.n_points)
        x.setflags(write=False)
        return x

    @cached_property
    def k(self) -> np.ndarray:
        k = 2.0 * np.pi * sfft.fftfreq(self.n_points, d=self.dx)
        k.setflags(write=False)
        return k

    def to_dict(self) -> dict:
        return {"x_min": self.x_min, "x_max": self.x_max, "n_points": self.n_points}


@dataclass(frozen=True)
class WaveFunction:
    grid: Grid1D
    values: np.ndarray
    time: float = 0.0

    def __post_init__(self):
        values = np.array(self.values, dtype=complex)
        if values.shape != (self.grid.n_points,):
            raise GridError(f"expected {self.grid.n_points} amplitudes, got {values.shape}")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        norm = self.norm()
        if norm == 0.0:
            raise DegenerateStateError("wave function vanishes on the grid")
        if abs(norm - 1.0) > NORM_TOL:
            raise NormalizationError(f"norm {norm:.12g} differs from 1 by more than {NORM_TOL}")

    @classmethod
    def normalized(cls, grid: Grid1D, values, time: float = 0.0) -> "WaveFunction":
        values = np.asarray(values, dtype=complex)
        norm = np.sum(np.abs(values) ** 2) * grid.dx
        if norm == 0.0:
            raise DegenerateStateError("wave function vanishes on the grid")
        return cls(grid, values / np.sqrt(norm), time)

    def norm(self) -> float:
        return float(np.sum(np.abs(self.values) ** 2) * self.grid.dx)

    def density(self) -> np.ndarray:
        return np.abs(self.values) ** 2


@dataclass(frozen=True)
class HamiltonianSpec:
    """H = p^2/2m + V(x) - x f1(t) - p f2(t).

    ``df1``/``df2`` are the analytic time derivatives of the drives, used for
    the power integrand.  ``frequency_scale`` is the fastest physical
    frequency of the problem and bounds the propagation step.
    """

    mass: float = 1.0
    hbar: float = 1.0
    potential: Callable[[np.ndarray], np.ndarray] = _zero_potential
    f1: Drive = _zero
    f2: Drive = _zero
    df1: Drive = _zero
    df2: Drive = _zero
    frequency_scale: float = 1.0

    def __post_init__(self):
        if not (self.mass > 0 and self.hbar > 0):
            raise ValueError("mass and hbar must be positive")
        if not self.frequency_scale > 0:
            raise ValueError("frequency_scale must be positive")

    def with_offset(self, c: float) -> "HamiltonianSpec":
        """Same Hamiltonian with the static potential shifted by ``c``."""
        base = self.potential
        return HamiltonianSpec(
            self.mass, self.hbar, lambda x: base(x) + c,
            self.f1, self.f2, self.df1, self.df2, self.frequency_scale,
        )


@dataclass(frozen=True)
class BohmFields:
    grid: Grid1D
    density: np.ndarray
    velocity: np.ndarray
    quantum_potential: np.ndarray
    local_energy: np.ndarray
    time: float


def _derivatives(values: np.ndarray, grid: Grid1D, method: str):
    """First and second x-derivatives along the last axis."""
    if method == "spectral":
        k = grid.k
        vk = sfft.fft(values, axis=-1)
        d1 = sfft.ifft(1j * k * vk, axis=-1)
        d2 = sfft.ifft(-(k ** 2) * vk, axis=-1)
        return d1, d2
    if method == "fd4":
        dx = grid.dx

        def sh(s):
            return np.roll(values, -s, axis=-1)

        d1 = (-sh(2) + 8 * sh(1) - 8 * sh(-1) + sh(-2)) / (12 * dx)
        d2 = (-sh(2) + 16 * sh(1) - 30 * values + 16 * sh(-1) - sh(-2)) / (12 * dx ** 2)
        return d1, d2
    if method == "odd":
        # for states vanishing at x_min and x_max: odd extension to a cell of
        # twice the length, where a sine series is smooth and periodic
        n = grid.n_points
        tail = -values[..., :0:-1]
        zero = np.zeros(values.shape[:-1] + (1,), dtype=values.dtype)
        ext = np.concatenate([values, zero, tail], axis=-1)
        k = 2.0 * np.pi * sfft.fftfreq(2 * n, d=grid.dx)
        vk = sfft.fft(ext, axis=-1)
        d1 = sfft.ifft(1j * k * vk, axis=-1)[..., :n]
        d2 = sfft.ifft(-(k ** 2) * vk, axis=-1)[..., :n]
        return d1, d2
    raise ValueError(f"unknown derivative method {method!r}")


def field_arrays(values: np.ndarray, grid: Grid1D, h: HamiltonianSpec, t,
                 method: str = "spectral") -> dict:
    """All Bohmian fields for one or many states (rows) on ``grid``.

    ``t`` is a scalar or, for a 2-D stack, one time per row.  Returns a dict
    of arrays with the shape of ``values``; velocity, quantum potential and
    local energy are NaN where the density falls below the node floor.
    """
    values = np.asarray(values, dtype=complex)
    t = np.asarray(t, dtype=float)
    if values.ndim == 2:
        t = np.broadcast_to(t, (values.shape[0],))[:, None]
    m, hbar = h.mass, h.hbar
    x = grid.x
    f1 = np.vectorize(h.f1, otypes=[float])(t)
    f2 = np.vectorize(h.f2, otypes=[float])(t)

    d1, d2 = _derivatives(values, grid, method)
    density = np.abs(values) ** 2
    floor = NODE_FLOOR * density.max(axis=-1, keepdims=True)
    invalid = density < floor
    safe = np.where(invalid, 1.0, values)
    u = d1 / safe
    w = d2 / safe

    momentum = hbar * u.imag
    velocity = momentum / m - f2
    quantum_potential = -(hbar ** 2) / (2 * m) * (w.real + u.imag ** 2)
    # Re[(H psi)/psi] written in terms of u and w; matches the spectral H
    # application exactly because both use the same derivative operators.
    local_energy = (-(hbar ** 2) / (2 * m) * w.real - f2 * momentum
                    + h.potential(x) - x * f1)
    for arr in (velocity, quantum_potential, local_energy):
        arr[invalid] = np.nan
    return {
        "density": density,
        "velocity": velocity,
        "quantum_potential": quantum_potential,
        "local_energy": local_energy,
        "momentum": np.where(invalid, np.nan, momentum),
    }


def apply_hamiltonian(psi: WaveFunction, h: HamiltonianSpec, t: float | None = None,
                      method: str = "spectral") -> np.ndarray:
    """(H psi)(x) with kinetic and p-linear parts in k-space."""
    t = psi.time if t is None else t
    grid = psi.grid
    x = grid.x
    if method == "spectral":
        k = grid.k
        vk = sfft.fft(psi.values)
        tk = (h.hbar * k) ** 2 / (2 * h.mass) - h.hbar * k * h.f2(t)
        out = sfft.ifft(tk * vk)
    else:
        d1, d2 = _derivatives(psi.values, grid, method)
        out = -(h.hbar ** 2) / (2 * h.mass) * d2 + 1j * h.hbar * h.f2(t) * d1
    return out + (h.potential(x) - x * h.f1(t)) * psi.values


def bohm_fields(psi: WaveFunction, h: HamiltonianSpec, t: float | None = None,
                method: str = "spectral") -> BohmFields:
    t = psi.time if t is None else t
    f = field_arrays(psi.values, psi.grid, h, t, method)
    return BohmFields(psi.grid, f["density"], f["velocity"], f["quantum_potential"],
                      f["local_energy"], t)


def quantum_potential(psi: WaveFunction, h: HamiltonianSpec, method: str = "spectral") -> np.ndarray:
    return field_arrays(psi.values, psi.grid, h, psi.time, method)["quantum_potential"]


def velocity_field(psi: WaveFunction, h: HamiltonianSpec, t: float | None = None,
                   method: str = "spectral") -> np.ndarray:
    t = psi.time if t is None else t
    return field_arrays(psi.values, psi.grid, h, t, method)["velocity"]


def local_energy(psi: WaveFunction, h: HamiltonianSpec, t: float | None = None,
                 method: str = "spectral") -> np.ndarray:
    t = psi.time if t is None else t
    return field_arrays(psi.values, psi.grid, h, t, method)["local_energy"]


def born_density(psi: WaveFunction) -> np.ndarray:
    return psi.density()


def expectation_energy(psi: WaveFunction, h: HamiltonianSpec, t: float | None = None,
                       method: str = "spectral") -> float:
    """<psi|H|psi> on the grid."""
    hpsi = apply_hamiltonian(psi, h, t, method)
    return float(np.real(np.vdot(psi.values, hpsi)) * psi.grid.dx)
