import math

import numpy as np
import pytest
from scipy import stats

from bohmwork import Grid1D, OscillatorParams, PropagationPlan, TrajectorySpec, propagate, run_ensemble
from bohmwork.errors import EnsembleError, NodeCollisionError, OutOfDomainError, PlanError
from bohmwork.oscillator import eigen_state_on_grid, eigen_trajectory, eigen_work
from bohmwork.trajectories import (density_cdf, equivariance_test, integrate_trajectory,
                                   inverse_cdf, rng_for, run_batches, sample_initial_positions,
                                   write_trajectories_csv)


@pytest.fixture(scope="module")
def short_series():
    p = OscillatorParams()
    g = Grid1D(-12, 12, 512)
    plan = PropagationPlan(p.hamiltonian(), 0.0, 1.0, 256, 4)
    return p, propagate(eigen_state_on_grid(p, 1, g), plan)


def test_rng_streams_are_keyed():
    a = rng_for(7, 3).random(5)
    assert np.array_equal(a, rng_for(7, 3).random(5))
    assert not np.array_equal(a, rng_for(7, 4).random(5))


def test_inverse_cdf_sampling_is_gaussian():
    g = Grid1D(-10, 10, 1024)
    dens = np.exp(-g.x ** 2)
    x = sample_initial_positions(dens, g, 20000, seed=1)
    assert stats.kstest(x, stats.norm(scale=math.sqrt(0.5)).cdf).pvalue > 0.01


def test_density_cdf_closes_periodic_cell():
    g = Grid1D(0.0, 1.0, 64)
    x, cdf = density_cdf(np.ones(64), g)
    assert x[-1] == 1.0 and cdf[-1] == 1.0
    assert np.allclose(inverse_cdf([0.25, 0.5], np.ones(64), g), [0.25, 0.5])


def test_numeric_trajectories_follow_closed_form(short_series):
    p, series = short_series
    x0 = np.array([-1.5, -0.4, 0.6, 2.1])
    res = run_batches(x0, series, record_stride=16)
    assert res.ok.all()
    ref = eigen_trajectory(p, x0[None, :], res.times[:, None])
    assert np.max(np.abs(res.positions - ref)) < 1e-4
    # coarse test grid: interpolation limits the work identity to ~1e-4
    assert np.max(res.work_gap) < 1e-3


def test_work_over_full_protocol_matches_closed_form():
    p = OscillatorParams()
    g = Grid1D(-12, 12, 1024)
    series = propagate(eigen_state_on_grid(p, 0, g),
                       PropagationPlan(p.hamiltonian(), 0.0, p.tau, 1024, 4))
    x0 = np.array([-1.0, 0.0, 0.5])
    res = run_batches(x0, series)
    assert np.allclose(res.work_integral, eigen_work(p, x0), atol=1e-4)


def test_spec_validation(short_series):
    _, series = short_series
    with pytest.raises(PlanError):
        TrajectorySpec(series, 10, ode_dt=series.spacing * 2)
    with pytest.raises(PlanError):
        TrajectorySpec(series, 10, ode_dt=series.spacing / 8)
    with pytest.raises(PlanError):
        TrajectorySpec(series, 0)


def test_node_collision_is_reported(short_series):
    _, series = short_series
    with pytest.raises(NodeCollisionError):
        integrate_trajectory(0.0, series)


def test_out_of_domain_is_reported():
    p = OscillatorParams(A=3.0)
    g = Grid1D(-6, 6, 512)
    series = propagate(eigen_state_on_grid(p, 0, g), PropagationPlan(p.hamiltonian(), 0.0, 3.0, 512, 4))
    with pytest.raises(OutOfDomainError):
        integrate_trajectory(-3.0, series)


def test_ensemble_failure_budget(short_series):
    _, series = short_series
    spec = TrajectorySpec(series, 50, rng_seed=1)
    trajs = run_ensemble(spec)
    assert len(trajs) == 50 and sum(t.weight for t in trajs) == pytest.approx(1.0)
    res = run_batches(np.array([0.0, 1.0]), series)
    assert (~res.ok).sum() == 1
    from bohmwork.trajectories import check_failures
    with pytest.raises(EnsembleError) as info:
        check_failures(res, 0)
    assert 0 in info.value.failures


def test_threading_does_not_change_results(short_series):
    _, series = short_series
    x0 = np.linspace(-2, 2, 301) + 0.003
    a = run_batches(x0, series, workers=1, chunk=64)
    b = run_batches(x0, series, workers=3, chunk=64)
    c = run_batches(x0, series, workers=1, chunk=4096)
    assert np.array_equal(a.work_integral, b.work_integral, equal_nan=True)
    assert np.array_equal(a.work_integral, c.work_integral, equal_nan=True)


def test_equivariance_of_short_ensemble(short_series):
    _, series = short_series
    x0 = sample_initial_positions(np.abs(series.states[0]) ** 2, series.grid, 3000, seed=4)
    res = run_batches(x0, series)
    stat, pval = equivariance_test(res.positions[-1][res.ok], np.abs(series.states[-1]) ** 2, series.grid)
    assert pval > 0.01


def test_trajectory_csv(tmp_path, short_series):
    _, series = short_series
    tr = integrate_trajectory(0.7, series, record_stride=32)
    path = tmp_path / "t.csv"
    write_trajectories_csv([tr], path)
    lines = path.read_text().splitlines()
    assert lines[0] == "sample,x0,t,x,E,W_partial"
    assert len(lines) == 1 + len(tr.times)
