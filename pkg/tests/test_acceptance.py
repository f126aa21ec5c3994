"""Acceptance criteria for the default driven-oscillator scenario.

Each test prints one ``criterion N: PASS/FAIL`` line; the lines are
collected again in the terminal summary.  Seeds and sample sizes are fixed
up front.  Statistical checks on closed forms use the analytic engine with
10^6 samples; the numeric engine is exercised where the criterion is about
propagation or trajectory integration.
"""
import json
import math

import numpy as np
import pytest

from bohmwork import (Grid1D, MixtureSpec, NumericSettings, OscillatorParams, PropagationPlan,
                      PureCoherent, ThermalCoherent, ThermalEigenstates,
                      TwoLevelWell, cli, exp_work, exp_work_coherent_exact,
                      exp_work_coherent_highT, exp_work_eigenmixture,
                      exp_work_eigenmixture_quadrature, mean_work, mixture_work_distribution,
                      propagate, tmp_distribution)
from bohmwork import fock
from bohmwork.oscillator import eigen_state_on_grid, eigen_trajectory
from bohmwork.tmp import poisson_overlaps
from bohmwork.trajectories import WORK_TOL, equivariance_test, inverse_cdf, rng_for, run_batches

from conftest import record

pytestmark = pytest.mark.acceptance

P = OscillatorParams()
GRID = Grid1D(-12.0, 12.0, 2048)
N_STEPS, STRIDE = 4096, 4
SEED = 0
PER_STRATUM = 10_000
STAT_BUDGET = 1_000_000
LEVELS = (0, 1, 3)
PI2_2 = math.pi ** 2 / 2


def plan():
    return PropagationPlan(P.hamiltonian(), 0.0, P.tau, N_STEPS, STRIDE)


@pytest.fixture(scope="module")
def eigen_ensembles():
    """Propagated |n~> series and 10^4 Born-sampled trajectories per level."""
    out = {}
    for n in LEVELS:
        series = propagate(eigen_state_on_grid(P, n, GRID), plan())
        x0 = inverse_cdf(rng_for(SEED, n).random(PER_STRATUM), np.abs(series.states[0]) ** 2, GRID)
        out[n] = (series, run_batches(x0, series, record_stride=64))
    return out


@pytest.fixture(scope="module")
def stat_runs():
    """Analytic-engine distributions for both thermal mixtures at three betas."""
    runs = {}
    for beta in (0.01, 0.02, 1.0):
        runs["eigen", beta] = mixture_work_distribution(
            MixtureSpec(ThermalEigenstates(beta), P), "analytic", STAT_BUDGET, SEED)
        # one x0 per label: labels and positions are drawn jointly
        runs["coherent", beta] = mixture_work_distribution(
            MixtureSpec(ThermalCoherent(beta, STAT_BUDGET), P), "analytic", STAT_BUDGET, SEED)
    return runs


def test_criterion_01_analytic_trajectories(eigen_ensembles):
    x0 = inverse_cdf(rng_for(SEED, 99).random(1000), np.abs(eigen_ensembles[0][0].states[0]) ** 2, GRID)
    paths = {}
    errs = {}
    for n in LEVELS:
        series = eigen_ensembles[n][0]
        res = run_batches(x0, series, record_stride=1)
        ok = res.ok
        paths[n] = np.where(ok[None, :], res.positions, np.nan)
        ref = eigen_trajectory(P, x0[None, :], res.times[:, None])
        errs[n] = float(np.nanmax(np.abs(res.positions[:, ok] - ref[:, ok])))
    cross = max(float(np.nanmax(np.abs(paths[n] - paths[0]))) for n in LEVELS[1:])
    worst = max(errs.values())
    passed = worst <= 1e-3 and cross <= 1e-3
    record(1, passed, f"max |x - x_closed| = {worst:.2e} (n=0,1,3), max spread across n = {cross:.2e}, bound 1e-3")
    assert passed


def _gap_share(res):
    gaps = np.where(res.ok, res.work_gap, np.inf)
    return float(np.mean(gaps <= WORK_TOL)), float(np.max(res.work_gap[res.ok]))


def test_criterion_02_work_identity(eigen_ensembles):
    shares = {}
    for n in LEVELS:
        shares[f"|{n}~>"] = _gap_share(eigen_ensembles[n][1])[0]
    fine = NumericSettings(grid=GRID, n_steps=N_STEPS, snapshot_stride=STRIDE)
    scenarios = {
        "coherent": (MixtureSpec(PureCoherent(0.4 - 0.3j), P), PER_STRATUM, 1),
        "thermal eigen b=1": (MixtureSpec(ThermalEigenstates(1.0), P), 20_000, 500),
        "thermal coherent b=1": (MixtureSpec(ThermalCoherent(1.0, 10), P), 10_000, 1),
        "well": (MixtureSpec(TwoLevelWell()), 4000, 1),
    }
    for name, (spec, budget, floor) in scenarios.items():
        d = mixture_work_distribution(spec, "numeric", budget, SEED, fine, floor=floor)
        gaps = d.diagnostics["work_gaps"]
        failed = d.diagnostics["node_collisions"] + d.diagnostics["out_of_domain"]
        shares[name] = float(np.sum(gaps <= WORK_TOL) / (gaps.size + failed))
    worst = min(shares.values())
    passed = worst >= 0.999
    detail = ", ".join(f"{k} {v:.4%}" for k, v in shares.items())
    record(2, passed, f"share with |W_int - W_end| <= 1e-3: {detail}")
    assert passed


def test_criterion_03_average_work(stat_runs):
    lines, passed = [], True
    for kind in ("eigen", "coherent"):
        est = mean_work(stat_runs[kind, 1.0])
        z = (est.value - PI2_2) / est.stderr
        rel = abs(est.value - PI2_2) / PI2_2
        passed &= abs(z) <= 3 and rel <= 0.01
        lines.append(f"{kind} {est.value:.5f} +/- {est.stderr:.5f} (z={z:+.2f}, rel {rel:.2e})")
    record(3, passed, f"<W> vs pi^2/2 = {PI2_2:.5f}: " + "; ".join(lines))
    assert passed


def test_criterion_04_eigen_exp_work(stat_runs):
    closed = exp_work_eigenmixture(P, 1.0)
    est = exp_work(stat_runs["eigen", 1.0], 1.0)
    z = (est.value - closed) / est.stderr
    quad = exp_work_eigenmixture_quadrature(P, 1.0)
    passed = abs(z) <= 3 and abs(quad - closed) <= 1e-8
    record(4, passed, f"MC {est.value:.5f} +/- {est.stderr:.5f} vs closed form {closed:.10f} "
                      f"(z={z:+.2f}, tail flag {est.tail_flag}); quadrature gap {abs(quad - closed):.1e}")
    assert passed


def test_criterion_05_mixture_dependence(stat_runs):
    e = exp_work(stat_runs["eigen", 1.0], 1.0)
    c = exp_work(stat_runs["coherent", 1.0], 1.0)
    sep = abs(e.value - c.value) / math.hypot(e.stderr, c.stderr)
    # two-point slope, with common random numbers across the two betas
    d1, d2 = stat_runs["coherent", 0.01], stat_runs["coherent", 0.02]
    slope = d1.estimate((np.exp(-0.02 * d2.samples) - np.exp(-0.01 * d1.samples)) / 0.01)
    target = P.hbar * P.omega * math.sin(P.omega * P.tau / 2) ** 2
    rel = abs(slope.value - target) / target
    passed = sep > 5 and rel <= 0.10
    record(5, passed, f"beta=1: eigen {e.value:.4f} +/- {e.stderr:.4f}, coherent {c.value:.4f} +/- "
                      f"{c.stderr:.4f} (tail flag {c.tail_flag}), separation {sep:.1f} sigma; "
                      f"slope {slope.value:.4f} +/- {slope.stderr:.4f} vs {target:.4f} (rel {rel:.1%})")
    assert passed


@pytest.mark.xfail(strict=True, reason="the coherent mixture's value at beta=0.01 is 1 + 0.0101, "
                                       "resolved at this sample size; see the decisions ledger")
def test_criterion_06_high_temperature_limit(stat_runs):
    lines, passed = [], True
    refs = {"eigen": exp_work_eigenmixture(P, 0.01), "coherent": exp_work_coherent_exact(P, 0.01)}
    for kind in ("eigen", "coherent"):
        est = exp_work(stat_runs[kind, 0.01], 0.01)
        z = (est.value - 1.0) / est.stderr
        passed &= abs(z) <= 3
        lines.append(f"{kind} {est.value:.5f} +/- {est.stderr:.5f} (z vs 1 = {z:+.1f}, exact {refs[kind]:.5f})")
    lines.append(f"leading-order coherent value {exp_work_coherent_highT(P, 0.01):.4f}")
    record(6, passed, "<exp(-0.01 W)>: " + "; ".join(lines))
    assert passed


def test_criterion_07_equivariance(eigen_ensembles):
    pvals = {}
    for n in LEVELS:
        series, res = eigen_ensembles[n]
        _, pvals[n] = equivariance_test(res.positions[-1][res.ok], np.abs(series.states[-1]) ** 2, GRID)
    passed = min(pvals.values()) > 0.01
    record(7, passed, "chi^2 p-values at tau for 10^4 samples: "
                      + ", ".join(f"n={n} {p:.3f}" for n, p in pvals.items()))
    assert passed


def _state_error(n_steps):
    series = propagate(eigen_state_on_grid(P, 1, GRID), PropagationPlan(P.hamiltonian(), 0.0, P.tau, n_steps, n_steps))
    ref = eigen_state_on_grid(P, 1, GRID, P.tau).values
    return float(np.sqrt(np.sum(np.abs(series.states[-1] - ref) ** 2) * GRID.dx))


def test_criterion_08_propagator_quality(eigen_ensembles):
    drift = max(eigen_ensembles[n][0].norm_drift for n in LEVELS)
    fid = min(abs(np.vdot(eigen_ensembles[n][0].states[-1],
                          eigen_state_on_grid(P, n, GRID, P.tau).values) * GRID.dx) ** 2 for n in LEVELS)
    errs = [_state_error(n) for n in (128, 256, 512, 1024)]
    factors = [a / b for a, b in zip(errs, errs[1:])]
    passed = drift <= 1e-9 and fid >= 1 - 1e-6 and all(3.5 <= f <= 4.5 for f in factors)
    record(8, passed, f"norm drift {drift:.1e}, min fidelity deficit {1 - fid:+.1e}, dt-halving factors "
                      + ", ".join(f"{f:.3f}" for f in factors))
    assert passed


def test_criterion_09_tmp_consistency(stat_runs):
    d = tmp_distribution(P, 1.0)
    bohm = mean_work(stat_runs["eigen", 1.0])
    z = (d.mean - bohm.value) / bohm.stderr
    cols = float(np.max(np.abs(d.column_sums - 1)))
    flat = tmp_distribution(OscillatorParams(A=0.0), 1.0)
    point = flat.outcomes.shape == (1, 2) and flat.outcomes[0, 0] == 0.0 and abs(flat.outcomes[0, 1] - 1) < 1e-12
    poisson = 0.0
    for delta in (0.3 + 0.2j, 1.5j, -2.0 + 0.7j):
        v = fock.coherent_vector(delta, 120)
        poisson = max(poisson, float(np.max(np.abs(np.abs(v[:60]) ** 2 - poisson_overlaps(delta, 60)))))
    passed = abs(z) <= 3 and cols <= 1e-6 and point and poisson <= 1e-8
    record(9, passed, f"TMP mean {d.mean:.6f} vs Bohm {bohm.value:.5f} +/- {bohm.stderr:.5f} (z={z:+.2f}); "
                      f"column sums within {cols:.1e}; A=0 point mass {point}; Poisson gap {poisson:.1e}")
    assert passed


def test_criterion_10_determinism(tmp_path):
    settings = NumericSettings(grid=GRID, n_steps=N_STEPS, snapshot_stride=STRIDE)
    spec = MixtureSpec(ThermalEigenstates(2.0), P)
    a = mixture_work_distribution(spec, "numeric", 600, SEED, settings, workers=1, floor=50)
    b = mixture_work_distribution(spec, "numeric", 600, SEED, settings, workers=2, floor=50)
    same_samples = np.array_equal(a.samples, b.samples) and np.array_equal(a.weights, b.weights)
    cfg = {"oscillator": P.to_dict(), "mixture": {"kind": "ThermalEigenstates", "beta": 2.0},
           "trajectories": {"n_samples": 600, "seed": SEED, "stratum_floor": 50}, "engine": "both", "tmp": True}
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(cfg))
    texts = []
    for i in range(2):
        out = tmp_path / f"run{i}"
        assert cli.main(["run", str(path), "--out", str(out), "--threads", str(i + 1)]) == 0
        s = json.loads((out / "summary.json").read_text())
        s.pop("timestamp")
        texts.append((cli.dumps17(s), (out / "work_hist.csv").read_bytes()))
    same_summary = texts[0] == texts[1]
    passed = same_samples and same_summary
    record(10, passed, f"identical samples across worker counts {same_samples}; "
                       f"identical summary.json and histogram {same_summary}")
    assert passed
