"""Closed forms for the driven harmonic oscillator

    H(t) = p^2/2m + m w^2 x^2/2 - x f1(t) - p f2(t),
    f1 = -A sin(wt),  f2 = -(A/(m w)) cos(wt).

Eigenstates of H(0) are displaced number states D(alpha)|n> with
alpha = -iA/sqrt(2 hbar m w^3).  Trajectories, per-trajectory work and the
initial densities below are the exact expressions for that model; they
double as oracles for the grid pipeline.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numpy.polynomial.hermite import hermgauss

from .errors import DomainCoverageError, TruncationError
from .fields import Grid1D, HamiltonianSpec, WaveFunction

# relative edge density allowed by the coverage check (a Gaussian reaches
# this about 6.8 standard deviations out)
EDGE_DENSITY_TOL = 1e-10


@dataclass(frozen=True)
class OscillatorParams:
    m: float = 1.0
    omega: float = 1.0
    A: float = 1.0
    hbar: float = 1.0
    tau: float = math.pi

    def __post_init__(self):
        for name in ("m", "omega", "hbar", "tau"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.A < 0:
            raise ValueError("A must be non-negative")

    @property
    def alpha(self) -> complex:
        return complex(0.0, -self.A / math.sqrt(2 * self.hbar * self.m * self.omega ** 3))

    @property
    def length(self) -> float:
        """sqrt(hbar/(m w)), the oscillator length."""
        return math.sqrt(self.hbar / (self.m * self.omega))

    @property
    def coherent_shift(self) -> float:
        """sqrt(2 hbar/(m w)): position offset per unit Re(eta)."""
        return math.sqrt(2 * self.hbar / (self.m * self.omega))

    def hamiltonian(self) -> HamiltonianSpec:
        m, w, A = self.m, self.omega, self.A
        return HamiltonianSpec(
            mass=m,
            hbar=self.hbar,
            potential=lambda x: 0.5 * m * w ** 2 * np.asarray(x) ** 2,
            f1=lambda t: -A * math.sin(w * t),
            f2=lambda t: -A / (m * w) * math.cos(w * t),
            df1=lambda t: -A * w * math.cos(w * t),
            df2=lambda t: A / m * math.sin(w * t),
            frequency_scale=w,
        )

    def to_dict(self) -> dict:
        return {"m": self.m, "omega": self.omega, "A": self.A, "hbar": self.hbar, "tau": self.tau}


def drift(params: OscillatorParams, t):
    """Common displacement of every eigenstate trajectory at time t."""
    w = params.omega
    t = np.asarray(t, dtype=float)
    return params.A / (params.m * w ** 2) * (w * t * np.cos(w * t) - np.sin(w * t))


def iter_hermite_functions(n_max: int, y):
    """Yield the normalized Hermite functions h_0..h_{n_max} at ``y``.

    h_n(y) = H_n(y) exp(-y^2/2) / sqrt(2^n n! sqrt(pi)).  The recurrence runs
    on h_n exp(+y^2/2) with a per-point log scale, so neither the Gaussian
    nor the polynomial overflows for large n or |y|.
    """
    y = np.atleast_1d(np.asarray(y, dtype=float))
    prev = np.zeros_like(y)
    cur = np.full_like(y, math.pi ** -0.25)
    logscale = -0.5 * y ** 2
    yield cur * np.exp(logscale)
    for n in range(n_max):
        nxt = math.sqrt(2.0 / (n + 1)) * y * cur - math.sqrt(n / (n + 1)) * prev
        prev, cur = cur, nxt
        big = np.abs(cur) > 1e100
        if big.any():
            s = np.where(big, np.abs(cur), 1.0)
            cur = cur / s
            prev = prev / s
            logscale = logscale + np.log(s)
        with np.errstate(under="ignore"):
            yield cur * np.exp(logscale)


def hermite_functions(n_max: int, y) -> np.ndarray:
    """Stack of :func:`iter_hermite_functions`, shape (n_max + 1,) + y.shape."""
    y = np.atleast_1d(np.asarray(y, dtype=float))
    out = np.empty((n_max + 1,) + y.shape)
    for n, h in enumerate(iter_hermite_functions(n_max, y)):
        out[n] = h
    return out


def number_state(params: OscillatorParams, n: int, x) -> np.ndarray:
    """Real eigenfunction of the undriven oscillator."""
    q = math.sqrt(params.m * params.omega / params.hbar)
    return q ** 0.5 * hermite_functions(n, q * np.asarray(x, dtype=float))[n]


# -- energy-eigenstate family -------------------------------------------------

def eigen_phase(params: OscillatorParams, n: int, x, t):
    m, w, A, hbar = params.m, params.omega, params.A, params.hbar
    x = np.asarray(x, dtype=float)
    wt = w * np.asarray(t, dtype=float)
    return (-hbar * w * (n + 0.5) * t + A ** 2 * t / (2 * m * w ** 2)
            - A / w * x * (np.cos(wt) + wt * np.sin(wt))
            + A ** 2 / (4 * m * w ** 3) * (2 * wt * np.cos(2 * wt) + (wt ** 2 - 1) * np.sin(2 * wt)))


def eigen_trajectory(params: OscillatorParams, x0, t):
    return np.asarray(x0, dtype=float) + drift(params, t)


def eigen_work(params: OscillatorParams, x0):
    m, w, A, tau = params.m, params.omega, params.A, params.tau
    x0 = np.asarray(x0, dtype=float)
    return A * tau * (A * tau + 2 * m * x0 * w * math.cos(w * tau)) / (2 * m)


def eigen_initial_density(params: OscillatorParams, n: int, x0):
    if n < 0:
        raise ValueError("n must be non-negative")
    return number_state(params, n, x0) ** 2


def eigen_energy(params: OscillatorParams, n: int) -> float:
    """Eigenvalue hbar w (n + 1/2 - |alpha|^2), the same at all times."""
    return params.hbar * params.omega * (n + 0.5 - abs(params.alpha) ** 2)


def eigen_wavefunction(params: OscillatorParams, n: int, x, t: float = 0.0) -> np.ndarray:
    """psi(x, t) evolved from the t=0 eigenstate D(alpha)|n>.

    The modulus is the number-state profile carried along the drift; the
    sign changes of the real profile sit on top of the smooth phase.
    """
    x = np.asarray(x, dtype=float)
    phase = eigen_phase(params, n, x, t) / params.hbar
    return np.exp(1j * phase) * number_state(params, n, x - drift(params, t))


def eigen_amplitude(params: OscillatorParams, t: float) -> complex:
    """Displacement of the evolved eigenstate: alpha (1 + i w t) e^{-i w t}."""
    w = params.omega
    return params.alpha * (1 + 1j * w * t) * np.exp(-1j * w * t)


# -- coherent-state family ----------------------------------------------------

def _coherent_centre(params: OscillatorParams, eta: complex, t):
    """Position and momentum of the evolved coherent state at time t."""
    m, w, A, hbar = params.m, params.omega, params.A, params.hbar
    t = np.asarray(t, dtype=float)
    ups = (eta + A * t / math.sqrt(2 * hbar * m * w)) * np.exp(-1j * w * t)
    return params.coherent_shift * ups.real, math.sqrt(2 * hbar * m * w) * ups.imag


def coherent_phase(params: OscillatorParams, eta: complex, x, t):
    m, w, A, hbar = params.m, params.omega, params.A, params.hbar
    eta = complex(eta)
    er, ei = eta.real, eta.imag
    x = np.asarray(x, dtype=float)
    t = np.asarray(t, dtype=float)
    wt = w * t
    g = math.sqrt(2 * hbar * m * w)
    u = er + A * t / g
    return (-0.5 * hbar * w * t - hbar * A * t * ei / g
            - x * ((A * t + er * g) * np.sin(wt) - ei * g * np.cos(wt))
            - hbar * u * ei * np.cos(2 * wt)
            + 0.5 * hbar * (u ** 2 - ei ** 2) * np.sin(2 * wt))


def coherent_trajectory(params: OscillatorParams, eta: complex, x0, t):
    m, w, A = params.m, params.omega, params.A
    s = params.coherent_shift
    eta = np.asarray(eta, dtype=complex)
    t = np.asarray(t, dtype=float)
    return (np.asarray(x0, dtype=float) - eta.real * s
            + (A * t / (m * w) + eta.real * s) * np.cos(w * t)
            + eta.imag * s * np.sin(w * t))


def coherent_work(params: OscillatorParams, eta, x0):
    m, w, A, hbar, tau = params.m, params.omega, params.A, params.hbar, params.tau
    eta = np.asarray(eta, dtype=complex)
    er, ei = eta.real, eta.imag
    s = params.coherent_shift
    slope = (A * (w * tau * math.cos(w * tau) + math.sin(w * tau))
             + math.sqrt(2 * hbar * m * w ** 3) * (er * (math.cos(w * tau) - 1) + ei * math.sin(w * tau)))
    return (A * tau * (A * tau / (2 * m) + math.sqrt(2 * hbar * w / m) * er)
            + slope * (np.asarray(x0, dtype=float) - er * s))


def coherent_initial_density(params: OscillatorParams, eta: complex, x0):
    mw = params.m * params.omega / params.hbar
    x0 = np.asarray(x0, dtype=float)
    return math.sqrt(mw / math.pi) * np.exp(-mw * (x0 - complex(eta).real * params.coherent_shift) ** 2)


def coherent_wavefunction(params: OscillatorParams, eta: complex, x, t: float = 0.0) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    xc, _ = _coherent_centre(params, eta, t)
    mw = params.m * params.omega / params.hbar
    env = (mw / math.pi) ** 0.25 * np.exp(-0.5 * mw * (x - xc) ** 2)
    return env * np.exp(1j * coherent_phase(params, eta, x, t) / params.hbar)


# -- mixture averages -----------------------------------------------------------

def exp_work_eigenmixture(params: OscillatorParams, beta: float) -> float:
    m, w, A, hbar, tau = params.m, params.omega, params.A, params.hbar, params.tau
    if not beta > 0:
        raise ValueError("beta must be positive")
    b = hbar * w * beta / 2
    return math.exp(-(A * tau) ** 2 * beta / (2 * m) * (1 - b * math.cos(w * tau) ** 2 / math.tanh(b)))


def exp_work_eigenmixture_highT(params: OscillatorParams, beta: float) -> float:
    """First-order expansion of :func:`exp_work_eigenmixture` in beta."""
    m, w, A, tau = params.m, params.omega, params.A, params.tau
    return 1 - beta * (A * tau) ** 2 * math.sin(w * tau) ** 2 / (2 * m)


def exp_work_coherent_highT(params: OscillatorParams, beta: float) -> float:
    """Leading-order <exp(-beta W)> for the coherent-state mixture.

    Trustworthy only while ``high_temperature_ok`` holds.
    """
    return 1 + beta * params.hbar * params.omega * math.sin(params.omega * params.tau / 2) ** 2


def high_temperature_ok(params: OscillatorParams, beta: float, limit: float = 0.3) -> bool:
    return beta * params.hbar * params.omega <= limit


def thermal_tail_cutoff(params: OscillatorParams, beta: float, tail: float = 1e-8) -> int:
    """Smallest n_max with sum_{n > n_max} p_n < tail."""
    x = beta * params.hbar * params.omega
    # tail mass is exp(-(n_max+1) x)
    return max(0, math.ceil(-math.log(tail) / x - 1 + 1e-12))


def exp_work_eigenmixture_quadrature(params: OscillatorParams, beta: float,
                                     n_nodes: int = 200, rtol: float = 1e-15,
                                     max_nodes: int = 300) -> float:
    """Gauss-Hermite evaluation of sum_n p_n <n| exp(-beta W(x0)) |n>.

    Independent of the closed form.  The sum over n is cut once a term
    drops below ``rtol`` of the running total; the thermal tail alone is not
    a safe cutoff because exp(-beta W) grows with x0.  If ``n_nodes`` is not
    enough the rule is retried once with ``max_nodes``; numpy's node
    generator loses accuracy beyond about 300 nodes, so small beta (where
    many levels matter) raises instead.
    """
    q = math.exp(-beta * params.hbar * params.omega)
    for nodes in sorted({n_nodes, max(n_nodes, max_nodes)}):
        y, wts = hermgauss(nodes)
        g = np.exp(-beta * eigen_work(params, y * params.length))
        n_limit = nodes // 2 - 1
        hf = hermite_functions(n_limit, y)
        # h_n^2 exp(y^2) is the polynomial part integrated against exp(-y^2)
        with np.errstate(over="ignore", invalid="ignore"):
            poly = np.nan_to_num(hf ** 2 * np.exp(y ** 2))
        total = 0.0
        quiet = 0
        for n in range(n_limit + 1):
            term = (1 - q) * q ** n * float(np.sum(wts * poly[n] * g))
            total += term
            quiet = quiet + 1 if abs(term) < rtol * abs(total) else 0
            if quiet >= 5:
                return total
    raise TruncationError(f"quadrature did not converge with {max_nodes} nodes")


def exp_work_coherent_exact(params: OscillatorParams, beta: float) -> float:
    """Exact Gaussian average of exp(-beta W) over the coherent mixture.

    The work is affine in x0 and in (Re eta, Im eta) jointly quadratic, and
    both distributions are Gaussian, so the average reduces to a 2x2
    determinant.  Returns ``inf`` where the integral diverges.
    """
    m, w, A, hbar, tau = params.m, params.omega, params.A, params.hbar, params.tau
    sig2 = 1.0 / (2.0 * math.expm1(beta * hbar * w))
    sx2 = hbar / (2 * m * w)
    mu = np.array([params.alpha.real, params.alpha.imag])
    c0 = (A * tau) ** 2 / (2 * m)
    c1 = A * tau * math.sqrt(2 * hbar * w / m)
    b0 = A * (w * tau * math.cos(w * tau) + math.sin(w * tau))
    b = math.sqrt(2 * hbar * m * w ** 3) * np.array([math.cos(w * tau) - 1, math.sin(w * tau)])
    k = beta ** 2 * sx2
    M = k * np.outer(b, b)
    g = -beta * c1 * np.array([1.0, 0.0]) + k * b0 * b
    h0 = -beta * c0 + 0.5 * k * b0 ** 2
    P = np.eye(2) / sig2 - M
    if np.linalg.eigvalsh(P).min() <= 0:
        return math.inf
    v = g + M @ mu
    expo = h0 + g @ mu + 0.5 * mu @ M @ mu + 0.5 * v @ np.linalg.solve(P, v)
    return float(math.exp(expo) / math.sqrt(np.linalg.det(np.eye(2) - sig2 * M)))


# -- grid helpers -------------------------------------------------------------

def eigen_state_on_grid(params: OscillatorParams, n: int, grid: Grid1D, t: float = 0.0) -> WaveFunction:
    return WaveFunction.normalized(grid, eigen_wavefunction(params, n, grid.x, t), t)


def coherent_state_on_grid(params: OscillatorParams, eta: complex, grid: Grid1D,
                           t: float = 0.0) -> WaveFunction:
    return WaveFunction.normalized(grid, coherent_wavefunction(params, eta, grid.x, t), t)


def check_coverage(params: OscillatorParams, grid: Grid1D, n_max: int = 0, etas=(),
                   tol: float = EDGE_DENSITY_TOL) -> None:
    """Raise unless every state stays inside the grid over [0, tau].

    A state is covered when its density at both grid edges, for every
    position it reaches along the drift, is below ``tol`` times its peak.
    """
    ts = np.linspace(0.0, params.tau, 512)
    shifts = drift(params, ts)
    if n_max >= 0:
        span = max(40.0, math.sqrt(2 * n_max + 1) + 12)
        y = np.linspace(-span, span, 8001)
        q = math.sqrt(params.m * params.omega / params.hbar)
        edges = q * np.array([grid.x_min - shifts.min(), grid.x_max - shifts.max()])
        # one recurrence pass serves every level
        for n, h in enumerate(iter_hermite_functions(n_max, np.concatenate([y, edges]))):
            d = h * h
            rel = float(d[-2:].max() / d[:-2].max())
            if rel > tol:
                raise DomainCoverageError(
                    f"grid [{grid.x_min}, {grid.x_max}] too small for eigenstate n={n}: "
                    f"edge density {rel:.2e} of peak")
    for eta in etas:
        centres = _coherent_centre(params, eta, ts)[0]
        mw = params.m * params.omega / params.hbar
        rel = max(math.exp(-mw * (grid.x_min - centres.min()) ** 2),
                  math.exp(-mw * (grid.x_max - centres.max()) ** 2))
        if rel > tol:
            raise DomainCoverageError(f"grid too small for coherent state eta={eta}")
