"""Eigenvector overlaps p_ij = <u_i, A u_j> and the statistics built from them."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from rmtlab.ensemble import (
    GAUSSIAN,
    EntryDistribution,
    Observable,
    make_observable,
    sample_wigner,
    traceless,
)
from rmtlab.rng import derive_seed
from rmtlab.spectral import SpectralData, chain_trace, decompose, eigen_window, quantiles


class OverlapError(ValueError):
    pass


def _as_observable(A) -> Observable:
    return A if isinstance(A, Observable) else make_observable(A)


@dataclass(frozen=True, eq=False)
class OverlapTable:
    p: np.ndarray
    a2: float
    beta: int
    observable: Observable
    spectrum: SpectralData

    @property
    def N(self) -> int:
        return self.p.shape[0]


def overlaps(S: SpectralData, A, check: bool = True) -> OverlapTable:
    obs = _as_observable(A)
    if obs.N != S.N:
        raise OverlapError(f"observable dimension {obs.N} does not match N={S.N}")
    p = S.overlap_matrix(obs.centred)
    p = 0.5 * (p + p.conj().T)
    if not np.iscomplexobj(S.eigenvectors):
        p = p.real
    if check:
        scale = max(1.0, obs.norm_bound)
        tr = abs(np.trace(p))
        if tr > 1e-9 * S.N * scale:
            raise OverlapError(f"overlap trace {tr:.2e} is not zero")
        frob = float(np.sum(np.abs(p) ** 2))
        target = S.N * obs.a2
        if abs(frob - target) > 1e-8 * max(target, 1e-300):
            raise OverlapError(f"Frobenius sum {frob:.12g} differs from N<A0^2> = {target:.12g}")
    return OverlapTable(p, obs.a2, S.beta, obs, S)


def clt_statistic(T: OverlapTable, i: int, beta: Optional[int] = None, delta_prime: float = 1e-3) -> float:
    """sqrt(beta N / (2 <A0^2>)) (<u_i, A u_i> - <A>)."""
    if T.a2 < delta_prime:
        raise OverlapError(f"<A0^2> = {T.a2:.3g} below delta' = {delta_prime:g}")
    b = T.beta if beta is None else beta
    return math.sqrt(b * T.N / (2.0 * T.a2)) * float(np.real(T.p[i, i]))


def eth_max(T: OverlapTable, window: Optional[Sequence[int]] = None) -> float:
    """max |p_ij| over i, j in the window (half-open index range (lo, hi) or all indices)."""
    if window is None:
        block = T.p
    else:
        lo, hi = int(window[0]), int(window[1])
        if not 0 <= lo < hi <= T.N:
            raise OverlapError(f"window [{lo}, {hi}) is empty or outside [0, {T.N})")
        block = T.p[lo:hi, lo:hi]
    return float(np.max(np.abs(block)))


# Moments --------------------------------------------------------------------

def gaussian_moment(n: int) -> int:
    """E X^n for a standard Gaussian: 1(n even) (n-1)!!."""
    if n % 2:
        return 0
    out = 1
    for k in range(n - 1, 0, -2):
        out *= k
    return out


@dataclass(frozen=True)
class MomentRow:
    n: int
    moment: float
    stderr: float
    target: float

    @property
    def z(self) -> float:
        return (self.moment - self.target) / self.stderr if self.stderr > 0 else math.inf


@dataclass(frozen=True)
class MomentReport:
    rows: tuple
    samples: int

    def moments(self) -> np.ndarray:
        return np.array([r.moment for r in self.rows])

    def row(self, n: int) -> MomentRow:
        return self.rows[n - 1]


def moment_report(x, n_max: int = 4) -> MomentReport:
    x = np.asarray(x, dtype=float).ravel()
    if x.size < 2:
        raise OverlapError("moment estimation needs at least two samples")
    rows = []
    for n in range(1, n_max + 1):
        v = x ** n
        se = float(np.std(v, ddof=1) / math.sqrt(x.size))
        rows.append(MomentRow(n, float(np.mean(v)), max(se, np.finfo(float).tiny), float(gaussian_moment(n))))
    return MomentReport(tuple(rows), x.size)


def clt_samples(N: int, beta: int, M: int, seed: int, observable: Observable, index: Optional[int] = None,
                dist: EntryDistribution = GAUSSIAN, pool: int = 0) -> np.ndarray:
    """Monte Carlo draws of the CLT statistic at one bulk index (or pooled over index +- pool)."""
    i = N // 2 - 1 if index is None else int(index)
    lo, hi = i - pool, i + pool + 1
    A0 = observable.centred
    scale = math.sqrt(beta * N / (2.0 * observable.a2))
    out = np.empty((M, hi - lo))
    for k in range(M):
        W = sample_wigner(N, beta, dist, derive_seed(seed, k))
        _, U = eigen_window(W, lo, hi)
        out[k] = scale * np.real(np.einsum("ai,ab,bi->i", U.conj(), A0, U))
    return out.ravel()


def eth_samples(N: int, M: int, seed: int, observable: Observable, beta: int = 1,
                dist: EntryDistribution = GAUSSIAN) -> np.ndarray:
    out = np.empty(M)
    for k in range(M):
        S = decompose(sample_wigner(N, beta, dist, derive_seed(seed, k)), validate=False)
        out[k] = eth_max(overlaps(S, observable, check=False))
    return out


# Exact spectral identities ---------------------------------------------------

def kernel_weights(lam: np.ndarray, e: float, eta: float) -> np.ndarray:
    """eta / ((e - lambda)^2 + eta^2)."""
    return eta / ((e - lam) ** 2 + eta ** 2)


def _dense_im_resolvent(W: np.ndarray, z: complex) -> np.ndarray:
    G = np.linalg.inv(W - z * np.eye(W.shape[0]))
    return (G - G.conj().T) / 2j


@dataclass(frozen=True)
class IdentityCheck:
    lhs: float
    rhs: float

    @property
    def gap(self) -> float:
        return abs(self.lhs - self.rhs)

    def __iter__(self):
        return iter((self.lhs, self.rhs, self.gap))


def identity_qGq(S: SpectralData, q: np.ndarray, i: int, eta: float, energy: Optional[float] = None) -> IdentityCheck:
    """(1/N) sum_k kernel(lambda_i, lambda_k) N |<u_k, q>|^2 against <q, Im G(lambda_i + i eta) q>."""
    if eta <= 0:
        raise OverlapError("eta must be positive")
    q = np.asarray(q)
    e = S.eigenvalues[i] if energy is None else energy
    w = np.abs(S.eigenvectors.conj().T @ q) ** 2
    lhs = float(np.sum(kernel_weights(S.eigenvalues, e, eta) * S.N * w) / S.N)
    rhs = float(np.real(q.conj() @ _dense_im_resolvent(S.dense_matrix(), e + 1j * eta) @ q))
    return IdentityCheck(lhs, rhs)


def identity_one_index(S: SpectralData, A, i: int, j: int, eta: float,
                       energy: Optional[float] = None) -> IdentityCheck:
    """(1/N) sum_k kernel(lambda_i, lambda_k) N |p_kj|^2 against <u_j, A Im G A u_j>."""
    if eta <= 0:
        raise OverlapError("eta must be positive")
    A = np.asarray(A.centred if isinstance(A, Observable) else A)
    e = S.eigenvalues[i] if energy is None else energy
    v = A @ S.eigenvectors[:, j]
    p_col = S.eigenvectors.conj().T @ v
    lhs = float(np.sum(kernel_weights(S.eigenvalues, e, eta) * S.N * np.abs(p_col) ** 2) / S.N)
    rhs = float(np.real(v.conj() @ _dense_im_resolvent(S.dense_matrix(), e + 1j * eta) @ v))
    return IdentityCheck(lhs, rhs)


def identity_two_index(S: SpectralData, A, i: int, j: int, eta: float,
                       energies: Optional[tuple] = None) -> IdentityCheck:
    """(1/N^2) sum_kl kernel_i(k) kernel_j(l) N |p_kl|^2 against <A Im G_i A Im G_j>."""
    if eta <= 0:
        raise OverlapError("eta must be positive")
    A = np.asarray(A.centred if isinstance(A, Observable) else A)
    ei, ej = (S.eigenvalues[i], S.eigenvalues[j]) if energies is None else energies
    p = S.overlap_matrix(A)
    ki = kernel_weights(S.eigenvalues, ei, eta)
    kj = kernel_weights(S.eigenvalues, ej, eta)
    lhs = float(ki @ (S.N * np.abs(p) ** 2) @ kj / S.N ** 2)
    W = S.dense_matrix()
    Gi = _dense_im_resolvent(W, ei + 1j * eta)
    Gj = _dense_im_resolvent(W, ej + 1j * eta)
    rhs = float(np.real(np.trace(A @ Gi @ A @ Gj)) / S.N)
    return IdentityCheck(lhs, rhs)


def identity_two_index_gamma(S: SpectralData, A, i: int, j: int, eta: float) -> IdentityCheck:
    """Same sums at lambda_i, lambda_j but the resolvent side evaluated at the quantiles.

    The gap is controlled only by rigidity; it is reported, not asserted.
    """
    g = quantiles(0.0, S.N)
    exact = identity_two_index(S, A, i, j, eta)
    moved = identity_two_index(S, A, i, j, eta, energies=(g[i], g[j]))
    return IdentityCheck(exact.lhs, moved.rhs)


def identity_two_index_chain(S: SpectralData, A, i: int, j: int, eta: float) -> complex:
    """<A Im G_i A Im G_j> through the eigenbasis chain trace (second independent route)."""
    A = np.asarray(A.centred if isinstance(A, Observable) else A)
    zi = S.eigenvalues[i] + 1j * eta
    zj = S.eigenvalues[j] + 1j * eta
    return chain_trace(S, [(zi, A, True), (zj, A, True)])


def row_sum_check(S: SpectralData, A, j: int) -> tuple[float, float]:
    """sum_k |p_kj|^2 against <u_j, A0^2 u_j> (Frobenius row sum)."""
    A = np.asarray(A.centred if isinstance(A, Observable) else traceless(A))
    v = A @ S.eigenvectors[:, j]
    p_col = S.eigenvectors.conj().T @ v
    return float(np.sum(np.abs(p_col) ** 2)), float(np.real(v.conj() @ v))

