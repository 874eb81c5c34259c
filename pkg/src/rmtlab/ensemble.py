"""Wigner ensembles and deterministic observables.

A Wigner matrix of dimension N has entries w_ab = chi_ab / sqrt(N), independent
up to Hermitian symmetry. Off-diagonal chi is centred with E|chi|^2 = 1 and, in
the complex case, E chi^2 = 0. Diagonal entries follow a separate real law.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import IntEnum
from typing import Callable, Optional

import numpy as np

from rmtlab.rng import check_seed, make_rng

KINDS = ("gaussian", "rademacher", "uniform", "custom")
OBSERVABLE_KINDS = ("diagonal-signs", "random-symmetric", "projection", "user-matrix")
_SQRT3 = math.sqrt(3.0)


class EnsembleError(ValueError):
    """Invalid ensemble, distribution or observable parameters."""


class SymmetryClass(IntEnum):
    REAL = 1
    COMPLEX = 2

    @classmethod
    def of(cls, beta) -> "SymmetryClass":
        if isinstance(beta, SymmetryClass):
            return beta
        if beta in (1, 2) and float(beta) == int(beta):
            return cls(int(beta))
        raise EnsembleError(f"beta must be 1 or 2, got {beta!r}")

    @property
    def dtype(self):
        return np.float64 if self is SymmetryClass.REAL else np.complex128


Sampler = Callable[[np.random.Generator, int], np.ndarray]


@dataclass(frozen=True)
class EntryDistribution:
    """Law of the normalised entries chi.

    ``custom`` takes an off-diagonal sampler (real draws for beta=1, complex
    draws for beta=2) together with its declared moments. Declared moments are
    trusted; only the mean/variance constraints are checked.
    """

    kind: str = "gaussian"
    sampler: Optional[Sampler] = None
    diag_sampler: Optional[Sampler] = None
    mean: complex = 0.0
    variance: float = 1.0
    pseudo_variance: complex = 0.0
    moments: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise EnsembleError(f"unknown entry distribution {self.kind!r}; expected one of {KINDS}")
        if self.kind == "custom":
            if self.sampler is None:
                raise EnsembleError("custom distribution needs an off-diagonal sampler")
            if abs(self.mean) > 1e-12:
                raise EnsembleError(f"off-diagonal mean must be 0, declared {self.mean}")
            if abs(self.variance - 1.0) > 1e-12:
                raise EnsembleError(f"E|chi_od|^2 must be 1, declared {self.variance}")
        for p, value in self.moments.items():
            if not np.isfinite(value):
                raise EnsembleError(f"declared moment of order {p} is not finite")

    def check(self, beta) -> SymmetryClass:
        cls = SymmetryClass.of(beta)
        if cls is SymmetryClass.COMPLEX and self.kind == "custom" and abs(self.pseudo_variance) > 1e-12:
            raise EnsembleError("complex Hermitian class requires E chi_od^2 = 0")
        return cls

    def offdiag(self, rng: np.random.Generator, size: int, beta) -> np.ndarray:
        cls = self.check(beta)
        if self.kind == "custom":
            x = np.asarray(self.sampler(rng, size))
            return x.astype(cls.dtype, copy=False)
        if cls is SymmetryClass.REAL:
            return _standard(self.kind, rng, size)
        re = _standard(self.kind, rng, size)
        im = _standard(self.kind, rng, size)
        return (re + 1j * im) / math.sqrt(2.0)

    def diagonal(self, rng: np.random.Generator, size: int, beta) -> np.ndarray:
        cls = self.check(beta)
        if self.kind == "gaussian":
            # GOE diagonal has variance 2, GUE diagonal variance 1
            scale = math.sqrt(2.0) if cls is SymmetryClass.REAL else 1.0
            return scale * rng.standard_normal(size)
        if self.kind == "custom":
            if self.diag_sampler is None:
                return rng.standard_normal(size)
            return np.asarray(self.diag_sampler(rng, size), dtype=float)
        return _standard(self.kind, rng, size)


def _standard(kind: str, rng: np.random.Generator, size: int) -> np.ndarray:
    if kind == "gaussian":
        return rng.standard_normal(size)
    if kind == "rademacher":
        return rng.integers(0, 2, size=size) * 2.0 - 1.0
    if kind == "uniform":
        return rng.uniform(-_SQRT3, _SQRT3, size=size)
    raise EnsembleError(f"no standard sampler for {kind!r}")


def distribution(kind: str) -> EntryDistribution:
    return EntryDistribution(kind=kind)


GAUSSIAN = EntryDistribution("gaussian")


@dataclass(frozen=True, eq=False)
class WignerSample:
    matrix: np.ndarray
    beta: SymmetryClass
    seed: int
    kind: str = "gaussian"

    @property
    def N(self) -> int:
        return self.matrix.shape[0]


def hermitian_from_upper(upper: np.ndarray, diag: np.ndarray, dtype) -> np.ndarray:
    """Assemble a Hermitian matrix from strict-upper-triangle values and a real diagonal."""
    n = diag.shape[0]
    iu = np.triu_indices(n, 1)
    h = np.zeros((n, n), dtype=dtype)
    h[iu] = upper
    h = h + h.conj().T
    h[np.diag_indices(n)] = diag
    return h


def sample_wigner(N: int, beta=1, dist: EntryDistribution = GAUSSIAN, seed: int = 0) -> WignerSample:
    if int(N) != N or N < 2:
        raise EnsembleError(f"dimension must be an integer >= 2, got {N}")
    N = int(N)
    cls = dist.check(beta)
    seed = check_seed(seed)
    rng = make_rng(seed)
    scale = 1.0 / math.sqrt(N)
    upper = dist.offdiag(rng, N * (N - 1) // 2, cls) * scale
    diag = dist.diagonal(rng, N, cls) * scale
    return WignerSample(hermitian_from_upper(upper, diag, cls.dtype), cls, seed, dist.kind)


def gaussian_like(W: WignerSample, seed: int) -> WignerSample:
    return sample_wigner(W.N, W.beta, GAUSSIAN, seed)


def ou_weight(t: float) -> float:
    """Gaussian fraction c_T = 1 - exp(-T) matching the OU marginal at time T."""
    return -math.expm1(-t)


def ou_mix(W: WignerSample, U: WignerSample, t: float) -> WignerSample:
    """sqrt(1 - c_T) W + sqrt(c_T) U, the OU marginal at time t started from W."""
    if W.N != U.N or W.beta != U.beta:
        raise EnsembleError(f"ou_mix needs matching samples, got N={W.N}/{U.N}, beta={int(W.beta)}/{int(U.beta)}")
    if U.kind != "gaussian":
        raise EnsembleError("the mixing component must be Gaussian")
    if t < 0:
        raise EnsembleError(f"flow time must be nonnegative, got {t}")
    if t == 0:
        return W
    c = ou_weight(t)
    m = math.sqrt(1.0 - c) * W.matrix + math.sqrt(c) * U.matrix
    m = 0.5 * (m + m.conj().T)
    return WignerSample(m, W.beta, W.seed, W.kind)


def traceless(A: np.ndarray) -> np.ndarray:
    """A - <A> I, where <.> is the normalised trace."""
    A = np.asarray(A)
    n = A.shape[0]
    out = A.astype(np.result_type(A.dtype, np.float64), copy=True)
    mean = np.trace(out).real / n
    out[np.diag_indices(n)] -= mean
    return out


def is_hermitian(A: np.ndarray, tol: float = 1e-12) -> bool:
    A = np.asarray(A)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        return False
    scale = max(1.0, float(np.max(np.abs(A)))) if A.size else 1.0
    return bool(np.max(np.abs(A - A.conj().T), initial=0.0) <= tol * scale)


@dataclass(frozen=True, eq=False)
class Observable:
    matrix: np.ndarray
    centred: np.ndarray
    a2: float
    norm_bound: float
    kind: str = "user-matrix"

    @property
    def N(self) -> int:
        return self.matrix.shape[0]

    @property
    def mean(self) -> float:
        return float(np.trace(self.matrix).real / self.N)

    def scaled(self, s: float) -> "Observable":
        return make_observable(s * self.matrix, kind=self.kind)


def make_observable(A: np.ndarray, kind: str = "user-matrix", strict: bool = False,
                    delta_prime: float = 1e-3) -> Observable:
    A = np.asarray(A)
    if not is_hermitian(A):
        raise EnsembleError("observable must be a square Hermitian matrix")
    A = 0.5 * (A + A.conj().T)
    centred = traceless(A)
    a2 = float(np.vdot(centred, centred).real / A.shape[0])
    if strict and a2 < delta_prime:
        raise EnsembleError(f"<A0^2> = {a2:.3g} below the configured delta' = {delta_prime:g}")
    norm = float(np.max(np.abs(np.linalg.eigvalsh(A)))) if A.size else 0.0
    return Observable(A, centred, a2, norm, kind)


def haar_orthogonal(N: int, rng: np.random.Generator) -> np.ndarray:
    q, r = np.linalg.qr(rng.standard_normal((N, N)))
    return q * np.sign(np.diag(r))


def build_observable(N: int, kind: str = "random-symmetric", seed: int = 0, rank: Optional[int] = None,
                     matrix: Optional[np.ndarray] = None, strict: bool = False,
                     delta_prime: float = 1e-3) -> Observable:
    """Deterministic test matrices A.

    diagonal-signs:   diag(+1, -1, +1, ...).
    random-symmetric: O diag(signs) O^T with Haar O and a balanced sign pattern,
                      so ||A|| = 1 and <A0^2> = 1 for even N.
    projection:       orthogonal projection onto a random rank-r subspace.
    user-matrix:      the supplied Hermitian matrix.
    """
    if kind not in OBSERVABLE_KINDS:
        raise EnsembleError(f"unknown observable kind {kind!r}; expected one of {OBSERVABLE_KINDS}")
    if kind == "user-matrix":
        if matrix is None:
            raise EnsembleError("user-matrix observable needs a matrix")
        return make_observable(matrix, kind, strict, delta_prime)
    if int(N) != N or N < 2:
        raise EnsembleError(f"dimension must be an integer >= 2, got {N}")
    N = int(N)
    signs = np.where(np.arange(N) % 2 == 0, 1.0, -1.0)
    if kind == "diagonal-signs":
        return make_observable(np.diag(signs), kind, strict, delta_prime)
    rng = make_rng(seed)
    O = haar_orthogonal(N, rng)
    if kind == "random-symmetric":
        A = (O * signs) @ O.T
    else:
        r = N // 2 if rank is None else int(rank)
        if not 1 <= r <= N - 1:
            raise EnsembleError(f"projection rank must lie in [1, N-1], got {r}")
        Q = O[:, :r]
        A = Q @ Q.T
    return make_observable(0.5 * (A + A.T), kind, strict, delta_prime)
