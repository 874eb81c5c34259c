"""Dyson Brownian motion: matrix flow, Ornstein-Uhlenbeck flow, eigenvalue SDE, Green function comparison.

Matrix flow:  dW = dB / sqrt(N), with B a Hermitian Brownian motion of the
              ensemble's symmetry class (GOE/GUE increments).
OU flow:      dW = -W/2 dt + dB / sqrt(N); stationary for the Gaussian ensemble.
Eigenvalues:  d lambda_i = sqrt(2 / (beta N)) db_i + (1/N) sum_{j != i} dt / (lambda_i - lambda_j).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Union

import numpy as np

from rmtlab.ensemble import GAUSSIAN, EntryDistribution, SymmetryClass, WignerSample, ou_mix, sample_wigner
from rmtlab.rng import derive_seed, make_rng
from rmtlab.spectral import SpectralData, decompose, resolvent_diag


class FlowError(RuntimeError):
    pass


@dataclass(frozen=True, eq=False)
class MatrixPath:
    times: np.ndarray
    snapshots: list
    seed: int
    beta: SymmetryClass

    def sample(self, k: int = -1) -> WignerSample:
        return WignerSample(self.snapshots[k], self.beta, self.seed, "flow")


@dataclass(frozen=True, eq=False)
class EigenvaluePath:
    times: np.ndarray
    values: np.ndarray
    halvings: int = 0
    seed: int = 0


def brownian_increment(N: int, beta, h: float, seed: int) -> np.ndarray:
    """Hermitian increment with the covariance of sqrt(h) times a Gaussian Wigner matrix."""
    return math.sqrt(h) * sample_wigner(N, beta, GAUSSIAN, seed).matrix


def _as_sample(W0) -> WignerSample:
    if isinstance(W0, WignerSample):
        return W0
    M = np.asarray(W0)
    beta = SymmetryClass.COMPLEX if np.iscomplexobj(M) else SymmetryClass.REAL
    return WignerSample(M, beta, 0, "given")


def _grid(T: float, steps: int) -> np.ndarray:
    if steps < 1:
        raise FlowError("need at least one step")
    if T < 0:
        raise FlowError("flow time must be nonnegative")
    return np.linspace(0.0, T, steps + 1)


def integrate_matrix_flow(W0, T: float, steps: int = 1, seed: int = 0) -> MatrixPath:
    """Exact-in-distribution Euler-Maruyama for the additive matrix SDE."""
    W0 = _as_sample(W0)
    times = _grid(T, steps)
    snaps = [W0.matrix]
    W = W0.matrix
    for k in range(1, steps + 1):
        h = times[k] - times[k - 1]
        if h > 0:
            W = W + brownian_increment(W0.N, W0.beta, h, derive_seed(seed, k))
        snaps.append(W)
    return MatrixPath(times, snaps, seed, W0.beta)


def integrate_ou(W0, T: float, steps: int = 1, seed: int = 0) -> MatrixPath:
    """Exact OU update W <- e^{-h/2} W + sqrt(1 - e^{-h}) G per step."""
    W0 = _as_sample(W0)
    times = _grid(T, steps)
    snaps = [W0.matrix]
    W = W0.matrix
    for k in range(1, steps + 1):
        h = times[k] - times[k - 1]
        if h > 0:
            G = sample_wigner(W0.N, W0.beta, GAUSSIAN, derive_seed(seed, k)).matrix
            W = math.exp(-h / 2.0) * W + math.sqrt(-math.expm1(-h)) * G
        snaps.append(W)
    return MatrixPath(times, snaps, seed, W0.beta)


def _drift(lam: np.ndarray) -> np.ndarray:
    n = lam.shape[0]
    d = lam[:, None] - lam[None, :]
    np.fill_diagonal(d, np.inf)
    return np.sum(1.0 / d, axis=1) / n


def integrate_eigenvalue_flow(lam0, T: float, steps: int = 1000, seed: int = 0, beta: int = 1,
                              floor: float = 1e-10, max_depth: int = 30, record_every: int = 1,
                              steps_per_unit: int = 1000) -> EigenvaluePath:
    """Euler-Maruyama for the eigenvalue SDE, refining by Brownian bridges on would-be crossings."""
    lam = np.array(lam0, dtype=float)
    n = lam.shape[0]
    if np.any(np.diff(lam) <= floor):
        raise FlowError("initial eigenvalues must be sorted with gaps above the floor")
    steps = max(int(steps), int(math.ceil(steps_per_unit * T)), 1)
    times = _grid(T, steps)
    rng = make_rng(seed)
    sigma = math.sqrt(2.0 / (beta * n))
    halvings = 0

    def advance(x, h, dB, depth):
        nonlocal halvings
        y = x + _drift(x) * h + sigma * dB
        if n == 1 or np.all(np.diff(y) > floor):
            return y
        if depth >= max_depth:
            bad = int(np.argmin(np.diff(y)))
            raise FlowError(f"persistent crossing of eigenvalues {bad} and {bad + 1} "
                            f"(gap {np.diff(y)[bad]:.3e}) after {depth} halvings, step {h:.3e}")
        halvings += 1
        mid = 0.5 * dB + math.sqrt(h / 4.0) * rng.standard_normal(n)
        x = advance(x, h / 2.0, mid, depth + 1)
        return advance(x, h / 2.0, dB - mid, depth + 1)

    out_t = [0.0]
    out_v = [lam.copy()]
    for k in range(1, steps + 1):
        h = times[k] - times[k - 1]
        lam = advance(lam, h, math.sqrt(h) * rng.standard_normal(n), 0)
        if k % record_every == 0 or k == steps:
            out_t.append(times[k])
            out_v.append(lam.copy())
    return EigenvaluePath(np.array(out_t), np.array(out_v), halvings, seed)


# Green function comparison -------------------------------------------------------

THETAS: dict = {
    "one": lambda x: np.ones_like(x),
    "x": lambda x: x,
    "x2": lambda x: x ** 2,
    "x3": lambda x: x ** 3,
    "x4": lambda x: x ** 4,
    "smooth": lambda x: 1.0 / (1.0 + x ** 2),
}


def theta_function(theta: Union[str, Callable]) -> Callable:
    if callable(theta):
        return theta
    if theta not in THETAS:
        raise FlowError(f"unknown test function {theta!r}; presets are {sorted(THETAS)}")
    return THETAS[theta]


def gft_observable(S: SpectralData, A0: np.ndarray, z: complex) -> float:
    """sqrt(N) <Im G(z) A0>."""
    U = S.eigenvectors
    p_diag = np.real(np.sum(U.conj() * (A0 @ U), axis=0))
    return float(math.sqrt(S.N) * np.sum(resolvent_diag(S.eigenvalues, z, im=True) * p_diag) / S.N)


def gft_statistic(S: SpectralData, A0: np.ndarray, z: complex, theta="x2") -> float:
    return float(theta_function(theta)(np.asarray(gft_observable(S, A0, z))))


@dataclass
class GftReport:
    delta: float
    stderr: float
    threshold: float
    mean_a: float
    mean_b: float
    samples: int
    values: Optional[np.ndarray] = field(default=None, repr=False)

    @property
    def passed(self) -> bool:
        return self.delta <= 3.0 * self.stderr + self.threshold


def gft_compare(N: int, M: int, t: float, z: complex, A0: np.ndarray, theta="x2", seed: int = 0,
                dist: EntryDistribution = EntryDistribution("rademacher"), beta: int = 1, omega: float = 0.05,
                seed_b: Optional[int] = None, zeta: float = 0.1) -> GftReport:
    """|E theta(X) under dist - E theta(X) after OU time t|, X = sqrt(N) <Im G(z) A0>.

    Ensemble B is the OU evolution of ensemble A's own samples (paired), so the
    reported standard error is that of the paired differences.
    """
    eta = abs(z.imag)
    if not N ** (-1.0 - zeta) * (1 - 1e-12) <= eta <= 1.0:
        raise FlowError(f"|Im z| = {eta:g} outside [N^(-1-zeta), 1] with zeta = {zeta}")
    th = theta_function(theta)
    seed_b = seed if seed_b is None else seed_b
    xa = np.empty(M)
    xb = np.empty(M)
    for k in range(M):
        W = sample_wigner(N, beta, dist, derive_seed(seed, k, 0))
        xa[k] = gft_observable(decompose(W, validate=False), A0, z)
        U = sample_wigner(N, beta, GAUSSIAN, derive_seed(seed_b, k, 1))
        xb[k] = gft_observable(decompose(ou_mix(W, U, t), validate=False), A0, z)
    ta, tb = th(xa), th(xb)
    diff = ta - tb
    se = float(np.std(diff, ddof=1) / math.sqrt(M)) if M > 1 else math.inf
    return GftReport(abs(float(np.mean(diff))), se, N ** (-omega), float(np.mean(ta)), float(np.mean(tb)), M,
                     np.stack([xa, xb]))


def overlap_entry_bound_probe(S: SpectralData, A: np.ndarray, z1: complex, z2: complex) -> float:
    """max_ab |(G(z1) A G(z2))_ab|."""
    U = S.eigenvectors
    g1 = resolvent_diag(S.eigenvalues, z1)
    g2 = resolvent_diag(S.eigenvalues, z2)
    P = S.overlap_matrix(np.asarray(A))
    M = (U * g1) @ (P * g2[None, :]) @ U.conj().T
    return float(np.max(np.abs(M)))


def entry_bound(N: int, xi: float = 0.2, zeta: float = 0.1) -> float:
    return N ** (0.5 + xi + 2.0 * zeta)
