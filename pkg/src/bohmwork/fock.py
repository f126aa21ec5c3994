"""Truncated number-basis representation of the driven oscillator."""
from __future__ import annotations

import math

import numpy as np
from scipy import sparse
from scipy.linalg import eigh_tridiagonal
from scipy.sparse.linalg import expm_multiply

from .errors import TruncationError
from .oscillator import OscillatorParams

TAIL_TOL = 1e-8


def annihilation(n_trunc: int) -> sparse.csr_matrix:
    return sparse.diags(np.sqrt(np.arange(1, n_trunc, dtype=float)), 1, format="csr")


def displacement_generator(delta: complex, n_trunc: int) -> sparse.csr_matrix:
    """delta a^dagger - conj(delta) a (anti-Hermitian)."""
    a = annihilation(n_trunc).astype(complex)
    return (delta * a.T - np.conj(delta) * a).tocsr()


def displacement_matrix(delta: complex, n_trunc: int, n_cols: int | None = None) -> np.ndarray:
    """First ``n_cols`` columns of exp(delta a^dagger - conj(delta) a), truncated.

    The generator is r e^{i theta} a^dagger - r e^{-i theta} a.  Diagonal
    phase changes turn it into i r X with X real symmetric tridiagonal
    (off-diagonal sqrt(n)), so the exponential follows from one tridiagonal
    eigendecomposition.
    """
    n_cols = n_trunc if n_cols is None else n_cols
    if delta == 0:
        return np.eye(n_trunc, n_cols, dtype=complex)
    r, theta = abs(delta), np.angle(delta)
    lam, vecs = eigh_tridiagonal(np.zeros(n_trunc), np.sqrt(np.arange(1, n_trunc, dtype=float)))
    n = np.arange(n_trunc)
    # S T^dagger on the left, T S^dagger on the right
    left = np.exp(1j * n * theta) * (-1j) ** (n % 4)
    right = np.conj(left[:n_cols])
    core = vecs @ (np.exp(1j * r * lam)[:, None] * vecs[:n_cols].T)
    return left[:, None] * core * right[None, :]


def displace(vectors, delta: complex) -> np.ndarray:
    """Apply D(delta) to a vector or to the columns of a matrix."""
    vectors = np.asarray(vectors, dtype=complex)
    if delta == 0:
        return vectors.copy()
    return expm_multiply(displacement_generator(delta, vectors.shape[0]), vectors)


def number_vector(n: int, n_trunc: int) -> np.ndarray:
    if not 0 <= n < n_trunc:
        raise TruncationError(f"level {n} outside truncation {n_trunc}")
    v = np.zeros(n_trunc, dtype=complex)
    v[n] = 1.0
    return v


def default_truncation(params: OscillatorParams, n_max: int, extra_shift: float = 0.0) -> int:
    """Levels needed to hold displaced versions of |0>..|n_max>.

    ``d`` bounds the total displacement.  A displaced |n> spreads over about
    2 d sqrt(n) levels around n, plus d^2 for the shift of the centre.
    """
    gamma = params.A * params.tau / math.sqrt(2 * params.hbar * params.m * params.omega)
    d = 2 * abs(params.alpha) + gamma + extra_shift
    return n_max + math.ceil(8 * d * math.sqrt(n_max + 1)) + 4 * math.ceil(d * d) + 20


def check_tail(vectors, tol: float = TAIL_TOL) -> float:
    """Population in the top 5% of levels (at least 5); raise if above ``tol``."""
    vectors = np.asarray(vectors)
    n = vectors.shape[0]
    band = max(5, n // 20)
    tail = float(np.max(np.sum(np.abs(vectors[n - band:]) ** 2, axis=0)))
    if tail > tol:
        raise TruncationError(f"population {tail:.2e} in the top {band} of {n} levels; raise n_trunc")
    return tail


def free_evolution(vectors, params: OscillatorParams, t: float) -> np.ndarray:
    """exp(-i H0 t/hbar) with H0 = hbar w (a^dagger a + 1/2)."""
    vectors = np.asarray(vectors, dtype=complex)
    n = np.arange(vectors.shape[0])
    phase = np.exp(-1j * params.omega * (n + 0.5) * t)
    return phase[:, None] * vectors if vectors.ndim == 2 else phase * vectors


def evolve(vectors, params: OscillatorParams, t: float) -> np.ndarray:
    """Closed-form propagator from 0 to t, up to a global phase.

    U(t) = exp{g(-a e^{iwt} + a^dagger e^{-iwt})} exp(-i H0 t/hbar) with
    g = A t/sqrt(2 hbar m w), i.e. free evolution followed by a displacement
    of g e^{-iwt}.
    """
    g = params.A * t / math.sqrt(2 * params.hbar * params.m * params.omega)
    return displace(free_evolution(vectors, params, t), g * np.exp(-1j * params.omega * t))


def hamiltonian_matrix(params: OscillatorParams, t: float, n_trunc: int) -> sparse.csr_matrix:
    m, w, A, hbar = params.m, params.omega, params.A, params.hbar
    a = annihilation(n_trunc).astype(complex)
    ad = a.T.tocsr()
    x = math.sqrt(hbar / (2 * m * w)) * (a + ad)
    p = 1j * math.sqrt(hbar * m * w / 2) * (ad - a)
    f1 = -A * math.sin(w * t)
    f2 = -A / (m * w) * math.cos(w * t)
    h0 = sparse.diags(hbar * w * (np.arange(n_trunc) + 0.5)).astype(complex)
    return (h0 - f1 * x - f2 * p).tocsr()


def expectation(op, vectors) -> np.ndarray:
    """<v|op|v> for a vector or each column of a matrix."""
    vectors = np.asarray(vectors, dtype=complex)
    return np.real(np.sum(np.conj(vectors) * (op @ vectors), axis=0))


def displaced_number_states(params: OscillatorParams, n_max: int, n_trunc: int) -> np.ndarray:
    """Columns D(alpha)|n> for n = 0..n_max: the eigenbasis of H(0)."""
    return displace(np.eye(n_trunc, n_max + 1, dtype=complex), params.alpha)


def coherent_vector(eta: complex, n_trunc: int) -> np.ndarray:
    return displace(number_vector(0, n_trunc), eta)
