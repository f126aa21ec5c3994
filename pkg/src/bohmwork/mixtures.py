"""Statistical mixtures, mixture work distributions and their estimators.

A mixture is a list of pure states with probabilities.  Its work
distribution is the probability-weighted sum of the pure-state
distributions, so samples are drawn stratum by stratum: one stratum per
number state for the thermal eigenstate mixture, one cluster of x0 per
coherent label for the coherent-state mixture.  Every sample carries the
weight (stratum probability)/(samples in stratum).

Two engines produce the samples.  ``analytic`` uses closed-form work for the
oscillator and closed-form fields for the well; ``numeric`` propagates every
member on a grid and integrates trajectories through the snapshots.
"""
from __future__ import annotations

import csv
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.special import ndtri

from . import fock
from .errors import AllocationError, TruncationError, ValidationError
from .fields import Grid1D
from .oscillator import (OscillatorParams, check_coverage, coherent_state_on_grid, coherent_work,
                         eigen_state_on_grid, eigen_work, iter_hermite_functions,
                         thermal_tail_cutoff)
from .propagator import PropagationPlan, propagate
from .trajectories import (check_failures, density_cdf, inverse_cdf, rng_for, run_batches)
from .well import TwoLevelWellState, WellFields, well_series

TAIL_BOUND = 1e-8
STRATUM_FLOOR = 100
LABEL_STREAM = 1 << 20
X0_STREAM = LABEL_STREAM + 1


# -- mixture kinds ------------------------------------------------------------

@dataclass(frozen=True)
class PureEigenstate:
    n: int = 0

    def __post_init__(self):
        if self.n < 0:
            raise ValidationError("n must be non-negative")


@dataclass(frozen=True)
class PureCoherent:
    eta: complex = 0j


@dataclass(frozen=True)
class ThermalEigenstates:
    beta: float = 1.0
    n_max: int | None = None

    def __post_init__(self):
        if not self.beta > 0:
            raise ValidationError("beta must be positive")


@dataclass(frozen=True)
class ThermalCoherent:
    beta: float = 1.0
    n_eta_samples: int = 1000

    def __post_init__(self):
        if not self.beta > 0:
            raise ValidationError("beta must be positive")
        if self.n_eta_samples < 1:
            raise ValidationError("n_eta_samples must be at least 1")


@dataclass(frozen=True)
class TwoLevelWell:
    c0: complex = 1 / math.sqrt(2)
    c1: complex = 1 / math.sqrt(2)
    t_end: float | None = None  # default: one beat period


KINDS = {k.__name__: k for k in (PureEigenstate, PureCoherent, ThermalEigenstates,
                                 ThermalCoherent, TwoLevelWell)}


@dataclass(frozen=True)
class MixtureSpec:
    kind: object
    params: object = field(default_factory=OscillatorParams)

    def __post_init__(self):
        if isinstance(self.kind, TwoLevelWell):
            if not isinstance(self.params, TwoLevelWellState):
                object.__setattr__(self, "params", TwoLevelWellState(c0=self.kind.c0, c1=self.kind.c1))
        elif not isinstance(self.params, OscillatorParams):
            raise ValidationError("oscillator mixtures need OscillatorParams")
        if isinstance(self.kind, ThermalEigenstates) and self.kind.n_max is not None:
            thermal_weights(self.params, self.kind.beta, self.kind.n_max)

    @property
    def beta(self) -> float | None:
        return getattr(self.kind, "beta", None)

    def to_dict(self) -> dict:
        d = {}
        for k, v in asdict(self.kind).items():
            d[k] = [v.real, v.imag] if isinstance(v, complex) else v
        return {"kind": type(self.kind).__name__, **d, "params": self.params.to_dict()}


# -- weights and labels -------------------------------------------------------

def thermal_weights(params: OscillatorParams, beta: float, n_max: int | None = None) -> np.ndarray:
    """p_n = (1 - e^{-x}) e^{-n x}, x = beta hbar w, renormalized over n <= n_max."""
    if not beta > 0:
        raise ValidationError("beta must be positive")
    x = beta * params.hbar * params.omega
    n_max = thermal_tail_cutoff(params, beta, TAIL_BOUND) if n_max is None else n_max
    tail = math.exp(-(n_max + 1) * x)
    if tail >= TAIL_BOUND:
        raise TruncationError(f"thermal tail {tail:.2e} beyond n_max={n_max} exceeds {TAIL_BOUND}")
    p = -math.expm1(-x) * np.exp(-x * np.arange(n_max + 1))
    return p / p.sum()


def coherent_label_sigma(params: OscillatorParams, beta: float) -> float:
    """Per-component standard deviation of eta about alpha."""
    return math.sqrt(0.5 / math.expm1(beta * params.hbar * params.omega))


def sample_coherent_labels(params: OscillatorParams, beta: float, n: int, seed=0) -> np.ndarray:
    """eta = alpha + sigma (Z1 + i Z2).

    The normals depend only on the seed, so label sets at different beta are
    the same draws rescaled (common random numbers).
    """
    if not beta > 0:
        raise ValidationError("beta must be positive")
    z = rng_for(seed, LABEL_STREAM).standard_normal((n, 2))
    s = coherent_label_sigma(params, beta)
    return params.alpha + s * (z[:, 0] + 1j * z[:, 1])


def allocate(probs, budget: int, floor: int = STRATUM_FLOOR) -> np.ndarray:
    """Per-stratum sample counts: ``floor`` each, remainder proportional.

    The remainder is split by largest remainders, so counts sum to
    ``budget`` exactly.
    """
    probs = np.asarray(probs, dtype=float)
    k = len(probs)
    if budget < floor * k:
        raise AllocationError(f"budget {budget} cannot give {floor} samples to each of {k} strata")
    extra = budget - floor * k
    share = probs / probs.sum() * extra
    counts = np.floor(share).astype(int)
    left = extra - counts.sum()
    if left:
        order = np.argsort(-(share - counts), kind="stable")
        counts[order[:left]] += 1
    return counts + floor


# -- work distribution --------------------------------------------------------

@dataclass(frozen=True)
class Estimate:
    value: float
    stderr: float


@dataclass(frozen=True)
class ExpWorkEstimate:
    beta: float
    value: float
    stderr: float
    tail_flag: bool
    top_share: float

    def to_dict(self) -> dict:
        return {"beta": self.beta, "value": self.value, "stderr": self.stderr,
                "tail_flag": self.tail_flag}


@dataclass
class WorkDistribution:
    """Weighted work samples.

    ``groups`` labels the stratum (``design="stratified"``) or the cluster
    (``design="clustered"``) of each sample; standard errors follow that
    sampling design.
    """

    samples: np.ndarray
    weights: np.ndarray
    groups: np.ndarray
    design: str = "stratified"
    spec: MixtureSpec | None = None
    engine: str = "analytic"
    x0: np.ndarray | None = None
    diagnostics: dict = field(default_factory=dict)
    bins: object = "fd"

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=float)
        w = np.asarray(self.weights, dtype=float)
        if w.shape != self.samples.shape or np.any(w < 0):
            raise ValidationError("weights must be non-negative, one per sample")
        self.weights = w / w.sum()
        self.groups = np.asarray(self.groups)

    def __len__(self):
        return self.samples.size

    @property
    def n_effective(self) -> float:
        w = self.weights
        return float(w.sum() ** 2 / np.sum(w * w))

    def estimate(self, values) -> Estimate:
        """Weighted mean of per-sample ``values`` and its design-based stderr."""
        f = np.asarray(values, dtype=float)
        w = self.weights
        mean = float(np.dot(w, f))
        ids, inv = np.unique(self.groups, return_inverse=True)
        gw = np.bincount(inv, weights=w)
        if self.design == "stratified":
            cnt = np.bincount(inv)
            gm = np.bincount(inv, weights=w * f) / gw
            dev2 = np.bincount(inv, weights=(f - gm[inv]) ** 2)
            var = np.where(cnt > 1, dev2 / np.maximum(cnt - 1, 1), 0.0)
            se2 = float(np.sum(gw ** 2 * var / cnt))
        else:
            g = len(ids)
            if g < 2:
                return Estimate(mean, 0.0)
            gm = np.bincount(inv, weights=w * f) / gw
            se2 = float(np.sum((gw * (gm - mean)) ** 2) * g / (g - 1))
        return Estimate(mean, math.sqrt(max(se2, 0.0)))

    def histogram(self, bins=None):
        return weighted_histogram(self.samples, self.weights, self.bins if bins is None else bins)

    def to_dict(self, beta: float | None = None) -> dict:
        mw = mean_work(self)
        edges, masses = self.histogram()
        beta = beta if beta is not None else (self.spec.beta if self.spec else None)
        out = {
            "spec": self.spec.to_dict() if self.spec else None,
            "engine": self.engine,
            "n_samples": int(self.samples.size),
            "mean_W": mw.value,
            "stderr_mean": mw.stderr,
            "exp_work": exp_work(self, beta).to_dict() if beta else None,
            "histogram": {"edges": edges.tolist(), "masses": masses.tolist()},
        }
        return out


def mean_work(d: WorkDistribution) -> Estimate:
    if d.n_effective < 2 - 1e-12:
        raise ValidationError("mean work needs an effective sample size of at least 2")
    return d.estimate(d.samples)


def exp_work(d: WorkDistribution, beta: float, top_fraction: float = 0.01,
             share_limit: float = 0.5) -> ExpWorkEstimate:
    """<exp(-beta W)> with a heavy-tail flag.

    The flag is set when the top ``top_fraction`` of samples, ranked by
    their contribution w exp(-beta W), carry more than ``share_limit`` of
    the estimate.
    """
    if not beta > 0:
        raise ValidationError("beta must be positive")
    with np.errstate(over="ignore"):
        f = np.exp(-beta * d.samples)
    est = d.estimate(f)
    contrib = np.sort(d.weights * f)[::-1]
    k = max(1, math.ceil(top_fraction * contrib.size))
    total = contrib.sum()
    share = float(contrib[:k].sum() / total) if total > 0 else 0.0
    return ExpWorkEstimate(beta, est.value, est.stderr, share > share_limit, share)


def weighted_quantile(values, weights, q):
    order = np.argsort(values, kind="stable")
    v, w = np.asarray(values)[order], np.asarray(weights)[order]
    c = np.cumsum(w) - 0.5 * w
    return np.interp(q, c / w.sum(), v)


def weighted_histogram(values, weights, bins="fd"):
    """Edges and masses (summing to 1); ``bins="fd"`` is Freedman-Diaconis."""
    values = np.asarray(values, dtype=float)
    weights = np.asarray(weights, dtype=float)
    weights = weights / weights.sum()
    lo, hi = float(values.min()), float(values.max())
    if hi - lo <= 1e-12 * max(1.0, abs(lo)):
        edges = np.array([lo - 0.5, hi + 0.5])
    elif isinstance(bins, str):
        if bins != "fd":
            raise ValidationError(f"unknown binning rule {bins!r}")
        q1, q3 = weighted_quantile(values, weights, [0.25, 0.75])
        n_eff = 1.0 / np.sum(weights ** 2)
        width = 2 * (q3 - q1) * n_eff ** (-1 / 3)
        n_bins = 1 if width <= 0 else int(min(1000, max(1, math.ceil((hi - lo) / width))))
        edges = np.linspace(lo, hi, n_bins + 1)
    else:
        edges = np.histogram_bin_edges(values, bins)
    masses, _ = np.histogram(values, edges, weights=weights)
    masses = masses / masses.sum()
    return edges, masses


def ks_distance(a: WorkDistribution, b: WorkDistribution) -> float:
    """Largest gap between the two weighted empirical CDFs."""
    grid = np.union1d(a.samples, b.samples)

    def cdf(d):
        order = np.argsort(d.samples, kind="stable")
        c = np.cumsum(d.weights[order])
        idx = np.searchsorted(d.samples[order], grid, side="right")
        return np.where(idx > 0, c[np.maximum(idx - 1, 0)], 0.0)

    return float(np.max(np.abs(cdf(a) - cdf(b))))


def write_histogram_csv(d: WorkDistribution, path, bins=None) -> None:
    edges, masses = d.histogram(bins)
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh)
        out.writerow(["bin_lo", "bin_hi", "mass"])
        for lo, hi, m in zip(edges[:-1], edges[1:], masses):
            out.writerow([f"{lo:.17g}", f"{hi:.17g}", f"{m:.17g}"])


def write_distribution_json(d: WorkDistribution, path, beta: float | None = None) -> None:
    with open(path, "w") as fh:
        json.dump(d.to_dict(beta), fh, indent=1)


# -- engines ------------------------------------------------------------------

@dataclass(frozen=True)
class NumericSettings:
    """Grid, propagation and trajectory settings for the numeric engine."""

    grid: Grid1D = field(default_factory=lambda: Grid1D(-12.0, 12.0, 2048))
    n_steps: int = 4096
    snapshot_stride: int = 4
    ode_dt: float | None = None
    record_stride: int = 64
    failure_budget: int = 0
    well_points: int = 256
    well_steps: int = 16384
    keep_trajectories: int = 0  # recorded paths kept per member, for dumps
    keep_series: bool = False  # keep the first member's snapshots


def _strata(spec: MixtureSpec):
    """(levels, probabilities) for eigenstate-type mixtures."""
    kind = spec.kind
    if isinstance(kind, PureEigenstate):
        return np.array([kind.n]), np.array([1.0])
    p = thermal_weights(spec.params, kind.beta, kind.n_max)
    return np.arange(len(p)), p


def _eigen_sampler_nodes(params: OscillatorParams, n_max: int):
    """Shared fine grid (in x) for inverse-CDF sampling of levels <= n_max."""
    turn = math.sqrt(2 * n_max + 1)
    half = (turn + 12.0) * params.length
    dx = params.length * min(0.02, math.pi / (16 * turn))
    n_pts = int(2 ** math.ceil(math.log2(2 * half / dx)))
    return np.linspace(-half, half, n_pts + 1)


def _analytic_eigen(spec: MixtureSpec, budget: int, seed: int, floor: int):
    params = spec.params
    levels, probs = _strata(spec)
    counts = allocate(probs, budget, floor if len(levels) > 1 else 1)
    x = _eigen_sampler_nodes(params, int(levels.max()))
    y = x / params.length
    wanted = dict(zip(levels.tolist(), range(len(levels))))
    x0 = np.empty(counts.sum())
    groups = np.empty(counts.sum(), dtype=int)
    weights = np.empty(counts.sum())
    starts = np.concatenate([[0], np.cumsum(counts)])
    for n, h in enumerate(iter_hermite_functions(int(levels.max()), y)):
        if n not in wanted:
            continue
        i = wanted[n]
        sl = slice(starts[i], starts[i + 1])
        u = rng_for(seed, n).random(counts[i])
        x0[sl] = inverse_cdf(u, h * h, x)
        groups[sl] = n
        weights[sl] = probs[i] / counts[i]
    work = eigen_work(params, x0)
    return WorkDistribution(work, weights, groups, "stratified", spec, "analytic", x0)


def _coherent_labels(spec: MixtureSpec, budget: int, seed: int):
    kind = spec.kind
    if isinstance(kind, PureCoherent):
        return np.array([complex(kind.eta)]), budget
    n_eta = kind.n_eta_samples
    per = budget // n_eta
    if per < 1:
        raise AllocationError(f"budget {budget} is smaller than the {n_eta} coherent labels")
    return sample_coherent_labels(spec.params, kind.beta, n_eta, seed), per


def _coherent_design(spec) -> str:
    # a single pure state is plain iid sampling
    return "stratified" if isinstance(spec.kind, PureCoherent) else "clustered"


def _analytic_coherent(spec: MixtureSpec, budget: int, seed: int):
    params = spec.params
    etas, per = _coherent_labels(spec, budget, seed)
    sx = math.sqrt(params.hbar / (2 * params.m * params.omega))
    u = rng_for(seed, X0_STREAM).random((len(etas), per))
    x0 = etas.real[:, None] * params.coherent_shift + sx * ndtri(u)
    eta_full = np.repeat(etas, per)
    x0 = x0.ravel()
    work = coherent_work(params, eta_full, x0)
    groups = np.repeat(np.arange(len(etas)), per)
    weights = np.full(x0.size, 1.0 / x0.size)
    d = WorkDistribution(work, weights, groups, _coherent_design(spec), spec, "analytic", x0)
    d.diagnostics["etas"] = etas
    return d


def _integrate_member(source, x0, settings: NumericSettings, ode_dt=None):
    res = run_batches(x0, source, ode_dt if ode_dt is not None else settings.ode_dt,
                      settings.record_stride)
    return res


def _summarize_numeric(parts, spec, design, settings):
    """Merge per-member batch results into a distribution."""
    works, weights, groups, x0s, gaps, kept = [], [], [], [], [], []
    failures = {}
    offset = 0
    drift = 0.0
    for gid, prob, res, series_drift in parts:
        fails = check_failures(res, settings.failure_budget - len(failures))
        failures.update({offset + k: v for k, v in fails.items()})
        offset += len(res.x0)
        ok = res.ok
        works.append(res.work_integral[ok])
        weights.append(np.full(ok.sum(), prob / ok.sum()))
        groups.append(np.full(ok.sum(), gid))
        x0s.append(res.x0[ok])
        gaps.append(res.work_gap[ok])
        drift = max(drift, series_drift)
        for i in np.flatnonzero(ok)[:settings.keep_trajectories]:
            kept.append(res.trajectory(int(i), prob / ok.sum()))
    gaps = np.concatenate(gaps)
    d = WorkDistribution(np.concatenate(works), np.concatenate(weights), np.concatenate(groups),
                         design, spec, "numeric", np.concatenate(x0s))
    d.diagnostics.update({
        "node_collisions": sum(1 for f in failures.values() if f["reason"] == "node_collision"),
        "out_of_domain": sum(1 for f in failures.values() if f["reason"] == "out_of_domain"),
        "norm_drift": drift,
        "work_consistency_max": float(gaps.max()) if gaps.size else 0.0,
        "work_gaps": gaps,
    })
    if settings.keep_trajectories:
        for k, tr in enumerate(kept):
            tr.index = k
        d.diagnostics["trajectories"] = kept
    return d


def _map(fn, items, workers):
    if workers > 1 and len(items) > 1:
        with ThreadPoolExecutor(workers) as pool:
            return list(pool.map(fn, items))
    return [fn(i) for i in items]


def _numeric_eigen(spec, budget, seed, floor, settings, workers):
    params = spec.params
    levels, probs = _strata(spec)
    counts = allocate(probs, budget, floor if len(levels) > 1 else 1)
    grid = settings.grid
    check_coverage(params, grid, int(levels.max()))
    h = params.hamiltonian()
    plan = PropagationPlan(h, 0.0, params.tau, settings.n_steps, settings.snapshot_stride)

    def member(i):
        n = int(levels[i])
        series = propagate(eigen_state_on_grid(params, n, grid), plan)
        if settings.keep_series and i == 0:
            kept["series"] = series
        u = rng_for(seed, n).random(counts[i])
        x0 = inverse_cdf(u, np.abs(series.states[0]) ** 2, grid)
        return n, probs[i], _integrate_member(series, x0, settings), series.norm_drift

    kept = {}
    parts = _map(member, list(range(len(levels))), workers)
    d = _summarize_numeric(parts, spec, "stratified", settings)
    if kept:
        d.diagnostics["series"] = kept["series"]
    return d


def _numeric_coherent(spec, budget, seed, settings, workers):
    params = spec.params
    etas, per = _coherent_labels(spec, budget, seed)
    grid = settings.grid
    check_coverage(params, grid, 0, etas)
    h = params.hamiltonian()
    plan = PropagationPlan(h, 0.0, params.tau, settings.n_steps, settings.snapshot_stride)
    u_all = rng_for(seed, X0_STREAM).random((len(etas), per))
    # shift of each label's centre on the grid is absorbed by sampling the
    # vacuum profile and translating, which matches the analytic engine
    vac = np.abs(coherent_state_on_grid(params, 0j, grid).values) ** 2
    xv, cdf = density_cdf(vac, grid)

    def member(j):
        series = propagate(coherent_state_on_grid(params, etas[j], grid), plan)
        if settings.keep_series and j == 0:
            kept["series"] = series
        x0 = np.interp(u_all[j], cdf, xv) + etas[j].real * params.coherent_shift
        return j, 1.0 / len(etas), _integrate_member(series, x0, settings), series.norm_drift

    kept = {}
    parts = _map(member, list(range(len(etas))), workers)
    d = _summarize_numeric(parts, spec, _coherent_design(spec), settings)
    d.diagnostics["etas"] = etas
    if kept:
        d.diagnostics["series"] = kept["series"]
    return d


def _well(spec, budget, seed, engine, settings):
    state = spec.params
    t_end = spec.kind.t_end
    if engine == "analytic":
        source = WellFields(state, t_end, settings.well_points, settings.well_steps)
        density = source.density(source.grid.x, 0.0)
        drift = 0.0
        ode_dt = None
    else:
        source = well_series(state, t_end, settings.well_steps + 1, state.default_grid(settings.well_points))
        density = np.abs(source.states[0]) ** 2
        drift = source.norm_drift
        ode_dt = source.spacing
    u = rng_for(seed, 0).random(budget)
    x0 = inverse_cdf(u, density, source.grid)
    res = _integrate_member(source, x0, settings, ode_dt)
    d = _summarize_numeric([(0, 1.0, res, drift)], spec, "stratified", settings)
    d.engine = engine
    if settings.keep_series and engine == "numeric":
        d.diagnostics["series"] = source
    return d


def mixture_work_distribution(spec: MixtureSpec, engine: str = "analytic", budget: int = 10_000,
                              seed: int = 0, settings: NumericSettings | None = None,
                              workers: int = 1, floor: int = STRATUM_FLOOR) -> WorkDistribution:
    """Sample the work distribution of a mixture.

    ``budget`` is the total number of trajectories.  Thermal eigenstate
    strata get ``floor`` samples each plus a share of the rest proportional
    to p_n; thermal coherent mixtures use ``budget // n_eta_samples`` x0 per
    label.
    """
    if engine not in ("analytic", "numeric"):
        raise ValidationError(f"unknown engine {engine!r}")
    if budget < 1:
        raise AllocationError("budget must be positive")
    settings = settings or NumericSettings()
    kind = spec.kind
    if isinstance(kind, TwoLevelWell):
        return _well(spec, budget, seed, engine, settings)
    if isinstance(kind, (PureEigenstate, ThermalEigenstates)):
        if engine == "analytic":
            return _analytic_eigen(spec, budget, seed, floor)
        return _numeric_eigen(spec, budget, seed, floor, settings, workers)
    if isinstance(kind, (PureCoherent, ThermalCoherent)):
        if engine == "analytic":
            return _analytic_coherent(spec, budget, seed)
        return _numeric_coherent(spec, budget, seed, settings, workers)
    raise ValidationError(f"unsupported mixture kind {kind!r}")


# -- independent oracle -------------------------------------------------------

def mean_work_fock(spec: MixtureSpec, n_trunc: int | None = None) -> float:
    """Tr[H(tau) rho(tau)] - Tr[H(0) rho(0)] in a truncated number basis.

    The coherent-state mixture has the same density operator as the thermal
    eigenstate mixture, so both use the thermal state.
    """
    kind = spec.kind
    if isinstance(kind, TwoLevelWell):
        return 0.0
    params = spec.params
    if isinstance(kind, PureEigenstate):
        n_max, probs, shift = kind.n, None, 0.0
    elif isinstance(kind, PureCoherent):
        n_max, probs, shift = 0, None, abs(complex(kind.eta))
    else:
        probs = thermal_weights(params, kind.beta, getattr(kind, "n_max", None))
        n_max, shift = len(probs) - 1, 0.0
    n_trunc = n_trunc or fock.default_truncation(params, n_max, shift)
    if isinstance(kind, PureEigenstate):
        v0 = fock.displace(fock.number_vector(kind.n, n_trunc), params.alpha)
        probs = np.array([1.0])
        v0 = v0[:, None]
    elif isinstance(kind, PureCoherent):
        v0 = fock.coherent_vector(complex(kind.eta), n_trunc)[:, None]
        probs = np.array([1.0])
    else:
        v0 = fock.displacement_matrix(params.alpha, n_trunc, n_max + 1)
    vt = fock.evolve(v0, params, params.tau)
    fock.check_tail(vt)
    e0 = fock.expectation(fock.hamiltonian_matrix(params, 0.0, n_trunc), v0)
    et = fock.expectation(fock.hamiltonian_matrix(params, params.tau, n_trunc), vt)
    return float(np.dot(probs, et - e0))
