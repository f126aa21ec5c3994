import math

import numpy as np
import pytest

from bohmwork import TwoLevelWellState, WellFields
from bohmwork.errors import NormalizationError
from bohmwork.fields import Grid1D, field_arrays
from bohmwork.trajectories import integrate_batch, sample_initial_positions
from bohmwork.well import two_level_well_wavefunction, well_series, well_values


def test_state_validation_and_spectrum():
    with pytest.raises(NormalizationError):
        TwoLevelWellState(c0=1.0, c1=0.5)
    s = TwoLevelWellState()
    assert s.energy(0) == pytest.approx(math.pi ** 2 / 2)
    assert s.energy(1) == pytest.approx(2 * math.pi ** 2)
    assert s.period == pytest.approx(4 / (3 * math.pi))


def test_wavefunction_is_normalized_and_vanishes_at_walls():
    s = TwoLevelWellState(c0=0.6, c1=0.8j)
    psi = two_level_well_wavefunction(s, 0.1)
    assert psi.norm() == pytest.approx(1.0)
    assert abs(well_values(s, np.array([0.0, 1.0]), 0.3)).max() < 1e-12


def test_closed_form_fields_match_grid_derivatives():
    s = TwoLevelWellState(c0=0.6, c1=0.8)
    src = WellFields(s)
    t = 0.13
    g = Grid1D(0.0, 1.0, 4096)
    psi = well_values(s, g.x, t)
    f = field_arrays(psi, g, s.hamiltonian(), t, method="fd4")
    inner = (g.x > 0.05) & (g.x < 0.95)
    v = src.velocity(g.x, t)
    e = src.energy(g.x, t)
    ok = inner & np.isfinite(v) & np.isfinite(f["velocity"])
    assert np.allclose(v[ok], f["velocity"][ok], atol=1e-6)
    assert np.allclose(e[ok], f["local_energy"][ok], atol=1e-4)


def test_power_is_quantum_potential_rate():
    s = TwoLevelWellState(c0=0.6, c1=0.8)
    src = WellFields(s)
    x = np.linspace(0.1, 0.9, 9)
    t, h = 0.21, 1e-5

    def vq(tt):
        return src.energy(x, tt) - 0.5 * s.m * src.velocity(x, tt) ** 2

    rate = (vq(t + h) - vq(t - h)) / (2 * h)
    assert np.allclose(src.power(x, t), rate, rtol=1e-5, atol=1e-4)


def test_trajectories_close_over_one_period():
    s = TwoLevelWellState(c0=0.8, c1=0.6)
    src = WellFields(s, n_steps=4096)
    x0 = sample_initial_positions(src.density(src.grid.x, 0.0), src.grid, 300, seed=5)
    res = integrate_batch(x0, src, record_stride=512)
    assert res.ok.all()
    assert np.max(np.abs(res.positions[-1] - res.positions[0])) < 1e-6
    assert np.max(np.abs(res.work_integral)) < 1e-3
    assert np.max(res.work_gap) < 1e-3


def test_partial_period_work_averages_to_zero():
    s = TwoLevelWellState(c0=0.8, c1=0.6)
    src = WellFields(s, t_end=0.37 * s.period, n_steps=1024)
    x0 = sample_initial_positions(src.density(src.grid.x, 0.0), src.grid, 2000, seed=2)
    res = integrate_batch(x0, src)
    w = res.work_integral[res.ok]
    assert np.std(w) > 0.1
    assert abs(w.mean()) < 4 * w.std() / math.sqrt(w.size)


def test_snapshot_series_of_the_well():
    s = TwoLevelWellState()
    series = well_series(s, n_snapshots=65, grid=s.default_grid(256))
    assert series.method == "odd"
    assert np.allclose(np.sum(np.abs(series.states) ** 2, axis=1) * series.grid.dx, 1.0)
