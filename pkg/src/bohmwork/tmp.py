"""Two-measurement-protocol work statistics for the driven oscillator.

Energy is measured in the eigenbasis of H(0) (number states displaced by
alpha), the state evolves for tau, and energy is measured again in the
eigenbasis of H(tau) (number states displaced by alpha e^{-i w tau}).  Both
spectra are hbar w (n + 1/2 - |alpha|^2), so the recorded work is
hbar w (m - n).
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln

from . import fock
from .errors import TruncationError
from .oscillator import OscillatorParams, eigen_amplitude, thermal_tail_cutoff

COLUMN_TOL = 1e-6


def thermal_populations(params: OscillatorParams, beta: float, n_max: int) -> np.ndarray:
    x = beta * params.hbar * params.omega
    p = -np.expm1(-x) * np.exp(-x * np.arange(n_max + 1))
    return p / p.sum()


def evolved_state_fock(params: OscillatorParams, n: int, n_trunc: int,
                       t: float | None = None) -> np.ndarray:
    """Number-basis coefficients of the evolved eigenstate, up to a global phase.

    The state started as D(alpha)|n> and at time t is D(alpha (1 + i w t)
    e^{-i w t})|n>: the displacement grows linearly and also rotates with
    the free oscillation.
    """
    t = params.tau if t is None else t
    vec = fock.displace(fock.number_vector(n, n_trunc), eigen_amplitude(params, t))
    fock.check_tail(vec)
    return vec


@dataclass(frozen=True)
class TMPDistribution:
    beta: float
    tau: float
    hbar_omega: float
    q_n: np.ndarray
    p_m_given_n: np.ndarray  # (n_trunc, n_max + 1), column n sums to 1
    outcomes: np.ndarray  # (k, 2): dE, probability

    @property
    def mean(self) -> float:
        return float(np.dot(self.outcomes[:, 0], self.outcomes[:, 1]))

    @property
    def second_moment(self) -> float:
        return float(np.dot(self.outcomes[:, 0] ** 2, self.outcomes[:, 1]))

    @property
    def variance(self) -> float:
        return self.second_moment - self.mean ** 2

    def exp_work(self, beta: float | None = None) -> float:
        beta = self.beta if beta is None else beta
        return float(np.dot(np.exp(-beta * self.outcomes[:, 0]), self.outcomes[:, 1]))

    @property
    def column_sums(self) -> np.ndarray:
        return self.p_m_given_n.sum(axis=0)

    def to_dict(self) -> dict:
        return {
            "beta": self.beta,
            "tau": self.tau,
            "outcomes": [{"dE": float(e), "p": float(p)} for e, p in self.outcomes],
            "mean": self.mean,
            "variance": self.variance,
        }

    def write_json(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=1)


def tmp_distribution(params: OscillatorParams, beta: float, n_trunc: int | None = None,
                     n_max: int | None = None) -> TMPDistribution:
    if not beta > 0:
        raise ValueError("beta must be positive")
    w, tau = params.omega, params.tau
    delta = eigen_amplitude(params, tau) - params.alpha * np.exp(-1j * w * tau)
    if n_max is None:
        # levels above the thermal cutoff still feed exp(-beta dE) through
        # downward transitions, weighted by exp(+beta hbar w n)
        cut = thermal_tail_cutoff(params, beta)
        d = abs(delta)
        n_max = cut + math.ceil(4 * d * math.sqrt(cut + 1) + 4 * d * d)
    n_trunc = fock.default_truncation(params, n_max) if n_trunc is None else n_trunc
    if n_trunc <= n_max:
        raise TruncationError("n_trunc must exceed the largest retained level")
    q = thermal_populations(params, beta, n_max)

    # evolve, then project on the final eigenbasis: D(-alpha e^{-iw tau})
    # D(b_tau) equals D(b_tau - alpha e^{-iw tau}) up to a phase per column
    final = fock.displacement_matrix(delta, n_trunc, n_max + 1)
    fock.check_tail(final)
    p_mn = np.abs(final) ** 2
    sums = p_mn.sum(axis=0)
    if np.any(np.abs(sums - 1) > COLUMN_TOL):
        raise TruncationError("conditional probabilities do not sum to one")

    hw = params.hbar * params.omega
    levels = np.arange(n_trunc)
    shift = levels[:, None] - np.arange(n_max + 1)[None, :]
    joint = p_mn * q[None, :]
    ks = np.arange(-n_max, n_trunc)
    probs = np.bincount((shift + n_max).ravel(), weights=joint.ravel(), minlength=len(ks))
    keep = probs > 0
    outcomes = np.column_stack([hw * ks[keep], probs[keep]])
    return TMPDistribution(beta, tau, hw, q, p_mn, outcomes)


def poisson_overlaps(delta: complex, n_levels: int) -> np.ndarray:
    """|<m|D(delta)|0>|^2 = exp(-|d|^2) |d|^(2m)/m!."""
    lam = abs(delta) ** 2
    m = np.arange(n_levels)
    return np.exp(-lam + m * math.log(lam) - gammaln(m + 1)) if lam > 0 else (m == 0).astype(float)
