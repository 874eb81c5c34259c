"""Spectral data, Stieltjes transforms, semicircle quantiles and resolvent chains.

The Stieltjes transform of the time-t semicircle solves
(1+t) m^2 + z m + 1 = 0 with Im m * Im z > 0; it is evaluated in closed form.
Resolvent functionals are computed in the eigenbasis of the sample.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
import scipy.linalg

from rmtlab.ensemble import WignerSample


class SpectralError(ValueError):
    """Invalid spectral input or eigensolver failure."""


@dataclass(frozen=True, eq=False)
class SpectralData:
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    seed: Optional[int] = None
    matrix: Optional[np.ndarray] = None

    @property
    def N(self) -> int:
        return self.eigenvalues.shape[0]

    @property
    def beta(self) -> int:
        return 2 if np.iscomplexobj(self.eigenvectors) else 1

    def overlap_matrix(self, A: np.ndarray) -> np.ndarray:
        """U* A U."""
        U = self.eigenvectors
        return U.conj().T @ (np.asarray(A) @ U)

    def dense_matrix(self) -> np.ndarray:
        if self.matrix is not None:
            return self.matrix
        U = self.eigenvectors
        return (U * self.eigenvalues) @ U.conj().T


def fix_phases(U: np.ndarray) -> np.ndarray:
    """Make the largest-magnitude entry of each column real and positive (lowest index on ties)."""
    idx = np.argmax(np.abs(U), axis=0)
    pivot = U[idx, np.arange(U.shape[1])]
    return U * (np.abs(pivot) / pivot)


def _as_matrix(W) -> tuple[np.ndarray, Optional[int]]:
    if isinstance(W, WignerSample):
        return W.matrix, W.seed
    return np.asarray(W), None


def decompose(W, validate: bool = True) -> SpectralData:
    M, seed = _as_matrix(W)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise SpectralError(f"expected a square matrix, got shape {M.shape}")
    if np.max(np.abs(M - M.conj().T), initial=0.0) > 1e-12 * max(1.0, np.max(np.abs(M), initial=0.0)):
        raise SpectralError("matrix is not Hermitian")
    try:
        lam, U = np.linalg.eigh(M)
    except np.linalg.LinAlgError as exc:
        raise SpectralError(f"eigensolver failed: {exc}") from exc
    U = fix_phases(U)
    if validate:
        check_decomposition(M, lam, U)
    return SpectralData(lam, U, seed, M)


def check_decomposition(M: np.ndarray, lam: np.ndarray, U: np.ndarray) -> None:
    n = lam.shape[0]
    if np.any(np.diff(lam) < 0):
        raise SpectralError("eigenvalues not sorted")
    ortho = np.max(np.abs(U.conj().T @ U - np.eye(n)))
    if ortho > 1e-10:
        raise SpectralError(f"eigenvectors not orthonormal: {ortho:.2e}")
    norm = max(np.max(np.abs(lam)), 1e-300)
    resid = np.linalg.norm(M @ U - U * lam, axis=0).max()
    if resid > 1e-9 * norm:
        raise SpectralError(f"eigen-residual {resid:.2e} exceeds 1e-9 ||W||")


def eigen_window(W, lo: int, hi: int) -> tuple[np.ndarray, np.ndarray]:
    """Eigenpairs with ascending indices lo <= i < hi only."""
    M, _ = _as_matrix(W)
    n = M.shape[0]
    if not 0 <= lo < hi <= n:
        raise SpectralError(f"window [{lo}, {hi}) outside [0, {n})")
    try:
        lam, U = scipy.linalg.eigh(M, subset_by_index=[lo, hi - 1], driver="evr", check_finite=False)
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise SpectralError(f"eigensolver failed: {exc}") from exc
    return lam, fix_phases(U)


# Stieltjes transforms -------------------------------------------------------

def _check_nonreal(z) -> np.ndarray:
    z = np.asarray(z, dtype=complex)
    if np.any(z.imag == 0):
        raise SpectralError("spectral parameter must have nonzero imaginary part")
    return z


def m_sc(z):
    """Semicircle Stieltjes transform: root of m^2 + z m + 1 with Im m Im z > 0."""
    z = _check_nonreal(z)
    s = np.sqrt(z - 2.0) * np.sqrt(z + 2.0)
    big = -(z + s) / 2.0
    small = 1.0 / big
    out = np.where(small.imag * z.imag > 0, small, big)
    return out[()] if out.ndim == 0 else out


def m_t(z, t: float = 0.0):
    """Transform of the variance-(1+t) semicircle: root of (1+t) m^2 + z m + 1."""
    if t < 0:
        raise SpectralError(f"time must be nonnegative, got {t}")
    s = math.sqrt(1.0 + t)
    return m_sc(np.asarray(z, dtype=complex) / s) / s


def rho_t(x, t: float = 0.0):
    """Density of the semicircle law with variance 1 + t."""
    x = np.asarray(x, dtype=float)
    v = 1.0 + t
    out = np.sqrt(np.clip(4.0 * v - x * x, 0.0, None)) / (2.0 * math.pi * v)
    return out[()] if out.ndim == 0 else out


def semicircle_cdf(x, t: float = 0.0):
    y = np.clip(np.asarray(x, dtype=float) / math.sqrt(1.0 + t), -2.0, 2.0)
    out = 0.5 + y * np.sqrt(4.0 - y * y) / (4.0 * math.pi) + np.arcsin(y / 2.0) / math.pi
    return out[()] if out.ndim == 0 else out


@dataclass(frozen=True)
class SpectralParameter:
    z: complex
    t: float = 0.0

    def __post_init__(self):
        _check_nonreal(self.z)

    @property
    def eta(self) -> float:
        return abs(self.z.imag)

    @property
    def rho(self) -> float:
        return abs(complex(m_t(self.z, self.t)).imag) / math.pi


def quantiles(t: float, N: int) -> np.ndarray:
    """gamma_i(t), i = 1..N, defined by int_{-inf}^{gamma_i} rho_t = i/N (so gamma_N is the edge)."""
    if N < 1:
        raise SpectralError(f"N must be positive, got {N}")
    target = np.arange(1, N + 1) / N
    lo = np.full(N, -2.0)
    hi = np.full(N, 2.0)
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        below = semicircle_cdf(mid) < target
        lo = np.where(below, mid, lo)
        hi = np.where(below, hi, mid)
    x = 0.5 * (lo + hi)
    x[-1] = 2.0
    return math.sqrt(1.0 + t) * x


def _sorted_eigenvalues(S) -> np.ndarray:
    lam = S.eigenvalues if isinstance(S, SpectralData) else np.asarray(S, dtype=float)
    if np.any(np.diff(lam) < 0):
        raise SpectralError("rigidity gauge needs eigenvalues in ascending order")
    return lam


def rigidity_gauge(S, t: float = 0.0) -> float:
    """max_i N^{2/3} min(i, N+1-i)^{1/3} |lambda_i - gamma_i(t)|."""
    lam = _sorted_eigenvalues(S)
    n = lam.shape[0]
    i = np.arange(1, n + 1)
    ihat = np.minimum(i, n + 1 - i)
    return float(np.max(n ** (2.0 / 3.0) * ihat ** (1.0 / 3.0) * np.abs(lam - quantiles(t, n))))


def kolmogorov_distance(eigenvalues: np.ndarray, t: float = 0.0) -> float:
    lam = np.sort(np.asarray(eigenvalues, dtype=float))
    n = lam.shape[0]
    F = semicircle_cdf(lam, t)
    i = np.arange(1, n + 1)
    return float(max(np.max(i / n - F), np.max(F - (i - 1) / n)))


# Resolvent functionals ------------------------------------------------------

def resolvent_diag(lam: np.ndarray, z: complex, im: bool = False) -> np.ndarray:
    """Eigenbasis diagonal of G(z) = (W - z)^{-1}, or of Im G = (G - G*)/(2i)."""
    _check_nonreal(z)
    g = 1.0 / (lam - z)
    return g.imag if im else g


def isotropic_form(S: SpectralData, q: np.ndarray, z: complex, im: bool = False) -> complex:
    """<q, G(z) q> (or <q, Im G(z) q>) as a spectral sum."""
    q = np.asarray(q)
    if abs(np.linalg.norm(q) - 1.0) > 1e-10:
        raise SpectralError("isotropic form needs a unit vector")
    c = S.eigenvectors.conj().T @ q
    return complex(np.sum(np.abs(c) ** 2 * resolvent_diag(S.eigenvalues, z, im)))


def resolvent(S: SpectralData, z: complex, im: bool = False) -> np.ndarray:
    U = S.eigenvectors
    return (U * resolvent_diag(S.eigenvalues, z, im)) @ U.conj().T


def _factor(spec) -> tuple[complex, Optional[np.ndarray], bool]:
    if len(spec) == 2:
        z, A = spec
        im = False
    else:
        z, A, im = spec
    return complex(z), A, bool(im)


def chain_trace(S: SpectralData, specs: Sequence, overlaps: Optional[dict] = None) -> complex:
    """<G_1 A_1 G_2 A_2 ... G_k A_k> with G_r = G(z_r) or Im G(z_r).

    Each entry of ``specs`` is (z, A) or (z, A, im); A=None means the identity.
    Overlap matrices U* A U may be passed in via ``overlaps`` keyed by id(A).
    """
    if not specs:
        raise SpectralError("empty resolvent chain")
    n = S.N
    cache = {} if overlaps is None else overlaps
    factors = []
    for spec in specs:
        z, A, im = _factor(spec)
        g = resolvent_diag(S.eigenvalues, z, im)
        if A is None:
            factors.append((g, None))
            continue
        A = np.asarray(A)
        if A.shape != (n, n):
            raise SpectralError(f"observable shape {A.shape} does not match N={n}")
        key = id(A)
        if key not in cache:
            cache[key] = S.overlap_matrix(A)
        factors.append((g, cache[key]))

    if len(factors) == 1:
        g, P = factors[0]
        return complex(np.sum(g) / n if P is None else np.sum(g * np.diagonal(P)) / n)
    g, P = factors[0]
    M = np.diag(g).astype(complex) if P is None else g[:, None] * P
    for g, P in factors[1:-1]:
        M = M * g[None, :] if P is None else M @ (g[:, None] * P)
    g, P = factors[-1]
    if P is None:
        return complex(np.sum(np.diagonal(M) * g) / n)
    return complex(np.sum(M * (g[:, None] * P).T) / n)


def chain_trace_dense(W: np.ndarray, specs: Sequence) -> complex:
    """Reference evaluation of a chain by explicit inversion (oracle; O(k N^3))."""
    W = np.asarray(W)
    n = W.shape[0]
    M = np.eye(n, dtype=complex)
    for spec in specs:
        z, A, im = _factor(spec)
        G = np.linalg.inv(W - z * np.eye(n))
        if im:
            G = (G - G.conj().T) / 2j
        M = M @ G
        if A is not None:
            M = M @ A
    return complex(np.trace(M) / n)
