import math

import numpy as np
import pytest

from bohmwork import Grid1D, HamiltonianSpec, OscillatorParams, PropagationPlan, WaveFunction, propagate
from bohmwork.errors import PlanError, StepSizeError
from bohmwork.oscillator import eigen_state_on_grid
from bohmwork.propagator import SnapshotSeries, read_snapshots, step, write_snapshots


def fidelity(a, b, dx):
    return abs(np.vdot(a, b) * dx) ** 2


def test_plan_validation(params):
    h = params.hamiltonian()
    with pytest.raises(PlanError):
        PropagationPlan(h, 0.0, 1.0, 10, 3)
    with pytest.raises(PlanError):
        PropagationPlan(h, 1.0, 1.0, 10, 1)
    with pytest.raises(StepSizeError):
        PropagationPlan(h, 0.0, math.pi, 10, 1)


def test_start_time_must_match(params, grid):
    plan = PropagationPlan(params.hamiltonian(), 0.0, 1.0, 64, 8)
    with pytest.raises(PlanError):
        propagate(eigen_state_on_grid(params, 0, grid, t=0.5), plan)


def test_free_gaussian_spreading():
    # free packet: sigma(t)^2 = s0^2 (1 + (t/(2 m s0^2))^2) with hbar = 1
    g = Grid1D(-40, 40, 1024)
    s0 = 1.0
    psi = WaveFunction.normalized(g, np.exp(-g.x ** 2 / (4 * s0 ** 2)))
    h = HamiltonianSpec(frequency_scale=1.0)
    series = propagate(psi, PropagationPlan(h, 0.0, 4.0, 200, 50))
    rho = np.abs(series.states[-1]) ** 2 * g.dx
    var = np.sum(rho * g.x ** 2)
    assert var == pytest.approx(s0 ** 2 * (1 + (4.0 / 2) ** 2), rel=1e-10)


def test_driven_eigenstate_tracks_closed_form(params, grid):
    psi0 = eigen_state_on_grid(params, 1, grid)
    series = propagate(psi0, PropagationPlan(params.hamiltonian(), 0.0, params.tau, 2048, 512))
    for i, t in enumerate(series.times):
        ref = eigen_state_on_grid(params, 1, grid, t).values
        assert fidelity(series.states[i], ref, grid.dx) > 1 - 1e-7
    assert series.norm_drift < 1e-12


def test_single_step_matches_plan(params, grid):
    psi0 = eigen_state_on_grid(params, 0, grid)
    h = params.hamiltonian()
    one = step(psi0, h, 0.0, 0.01)
    series = propagate(psi0, PropagationPlan(h, 0.0, 0.01, 1, 1))
    assert np.allclose(one.values, series.states[-1], atol=1e-14)


def test_snapshot_roundtrip(tmp_path, params, grid):
    series = propagate(eigen_state_on_grid(params, 0, grid),
                       PropagationPlan(params.hamiltonian(), 0.0, 0.5, 16, 8))
    path = tmp_path / "snap.bin"
    write_snapshots(series, path)
    g, times, states = read_snapshots(path)
    assert g == grid
    assert np.array_equal(times, series.times)
    assert np.array_equal(states, series.states)


def test_series_from_function_quantum_potential_rate():
    p = OscillatorParams()
    g = Grid1D(-12, 12, 512)
    from bohmwork.oscillator import eigen_wavefunction
    times = np.linspace(0, 1, 201)
    s = SnapshotSeries.from_function(g, p.hamiltonian(), times,
                                     lambda x, t: eigen_wavefunction(p, 0, x, t))
    # the eigenstate family's V_Q is a translated parabola: dV_Q/dt = m w^2 (x - xc) xc'
    rate = s.fields["quantum_potential_rate"][100]
    from bohmwork.oscillator import drift
    t = times[100]
    dxc = (drift(p, t + 1e-6) - drift(p, t - 1e-6)) / 2e-6
    expect = (g.x - drift(p, t)) * dxc
    inner = np.abs(g.x) < 5
    assert np.allclose(rate[inner], expect[inner], atol=1e-4)
