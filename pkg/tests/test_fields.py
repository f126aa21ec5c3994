import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from bohmwork import Grid1D, HamiltonianSpec, OscillatorParams, WaveFunction, bohm_fields
from bohmwork.errors import DegenerateStateError, GridError, NormalizationError
from bohmwork.fields import (apply_hamiltonian, expectation_energy, field_arrays, local_energy,
                             quantum_potential, velocity_field)
from bohmwork.oscillator import eigen_state_on_grid


def test_grid_rejects_bad_sizes():
    with pytest.raises(GridError):
        Grid1D(-1, 1, 1000)
    with pytest.raises(GridError):
        Grid1D(1, -1, 64)


def test_grid_nodes_and_wavenumbers():
    g = Grid1D(-2.0, 2.0, 64)
    assert g.x[0] == -2.0 and g.x[-1] == pytest.approx(2.0 - g.dx)
    assert np.max(g.k) == pytest.approx(math.pi / g.dx - g.dk)


def test_wavefunction_norm_checks():
    g = Grid1D(-5, 5, 128)
    with pytest.raises(NormalizationError):
        WaveFunction(g, np.exp(-g.x ** 2))
    with pytest.raises(DegenerateStateError):
        WaveFunction.normalized(g, np.zeros(128))
    psi = WaveFunction.normalized(g, np.exp(-g.x ** 2))
    assert psi.norm() == pytest.approx(1.0, abs=1e-14)


def test_plane_wave_velocity_and_drive_offset():
    g = Grid1D(0.0, 2 * math.pi, 64)
    k0 = 3.0
    psi = WaveFunction.normalized(g, np.exp(1j * k0 * g.x))
    h = HamiltonianSpec(mass=2.0, hbar=1.0, f2=lambda t: 0.25)
    v = velocity_field(psi, h)
    assert np.allclose(v, k0 / 2.0 - 0.25, atol=1e-12)


def test_ground_state_quantum_potential_and_energy(grid):
    p = OscillatorParams(A=0.0)
    psi = eigen_state_on_grid(p, 0, grid)
    vq = quantum_potential(psi, p.hamiltonian())
    x = grid.x
    inner = np.abs(x) < 4
    assert np.allclose(vq[inner], 0.5 - 0.5 * x[inner] ** 2, atol=1e-9)
    e = local_energy(psi, p.hamiltonian())
    assert np.allclose(e[inner], 0.5, atol=1e-9)


def test_local_energy_is_classical_plus_quantum_potential(grid, params):
    psi = eigen_state_on_grid(params, 2, grid, t=0.7)
    h = params.hamiltonian()
    f = field_arrays(psi.values, grid, h, 0.7)
    x = grid.x
    p = f["momentum"]
    classical = (p ** 2 / (2 * h.mass) + h.potential(x) - x * h.f1(0.7) - p * h.f2(0.7))
    ok = np.isfinite(f["local_energy"]) & (f["density"] > 1e-8)
    assert np.allclose(f["local_energy"][ok], classical[ok] + f["quantum_potential"][ok], atol=1e-7)


def test_nodes_are_masked(grid, params):
    psi = eigen_state_on_grid(params, 1, grid)
    f = bohm_fields(psi, params.hamiltonian())
    assert np.isnan(f.velocity[f.density < 1e-12 * f.density.max()]).all()
    assert np.isfinite(f.velocity[f.density > 1e-6]).all()


def test_fd4_matches_spectral_for_smooth_state(grid, params):
    psi = eigen_state_on_grid(params, 1, grid, t=0.3)
    h = params.hamiltonian()
    a = apply_hamiltonian(psi, h, method="spectral")
    b = apply_hamiltonian(psi, h, method="fd4")
    assert np.max(np.abs(a - b)) < 1e-5


def test_expectation_energy_of_eigenstate(grid):
    p = OscillatorParams(A=0.0)
    for n in (0, 3):
        assert expectation_energy(eigen_state_on_grid(p, n, grid), p.hamiltonian()) == pytest.approx(n + 0.5, abs=1e-10)


@settings(max_examples=25, deadline=None)
@given(st.floats(-3, 3), st.floats(0.2, 2.0))
def test_velocity_invariant_under_global_phase(k0, width):
    g = Grid1D(-10, 10, 256)
    base = np.exp(-(g.x / width) ** 2 / 2 + 1j * k0 * g.x)
    h = HamiltonianSpec()
    v1 = velocity_field(WaveFunction.normalized(g, base), h)
    v2 = velocity_field(WaveFunction.normalized(g, base * np.exp(1.3j)), h)
    rho = np.abs(base) ** 2
    ok = rho > 1e-6 * rho.max()
    assert np.allclose(v1[ok], v2[ok], atol=1e-9)
