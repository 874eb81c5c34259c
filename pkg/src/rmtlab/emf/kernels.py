"""Jump kernels of the eigenvector moment flow.

c_ij = 1 / (N (lambda_i - lambda_j)^2) is the Dyson kernel; a_ij(eta) is its
regularisation on scale eta. Short-range versions vanish unless both indices
lie in the bulk index set J and |i - j| <= ell. The lattice kernel keeps c on
short bulk scales and uses N / |i - j|^2 elsewhere.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from rmtlab.spectral import quantiles

MODES = ("full", "short", "lattice", "a", "a-short")


class KernelError(ValueError):
    pass


def bulk_set(N: int, delta: float) -> tuple[int, int]:
    """Half-open 0-based index range of J = {i : gamma_i(0) in (-2 + delta, 2 - delta)}."""
    if not 0 < delta < 2:
        raise KernelError(f"delta must lie in (0, 2), got {delta}")
    g = quantiles(0.0, N)
    inside = np.flatnonzero((g > -2 + delta) & (g < 2 - delta))
    if inside.size == 0:
        raise KernelError(f"bulk set is empty for N={N}, delta={delta}")
    return int(inside[0]), int(inside[-1]) + 1


@dataclass(frozen=True)
class KernelSpec:
    mode: str = "full"
    ell: int = 1
    eta: Optional[float] = None
    J: Optional[tuple] = None
    min_gap: float = 1e-8

    def __post_init__(self):
        if self.mode not in MODES:
            raise KernelError(f"unknown kernel mode {self.mode!r}; expected one of {MODES}")
        if int(self.ell) != self.ell or self.ell < 1:
            raise KernelError(f"range ell must be a positive integer, got {self.ell}")
        if self.mode in ("a", "a-short") and (self.eta is None or self.eta <= 0):
            raise KernelError("a-kernels need eta > 0")
        if self.J is not None and (len(self.J) != 2 or self.J[0] >= self.J[1]):
            raise KernelError(f"J must be a nonempty half-open range, got {self.J}")

    @property
    def short(self) -> bool:
        return self.mode in ("short", "a-short")

    def bulk(self, N: int) -> tuple[int, int]:
        J = (0, N) if self.J is None else (int(self.J[0]), int(self.J[1]))
        if J[0] < 0 or J[1] > N:
            raise KernelError(f"J = {J} is not inside [0, {N})")
        return J

    def with_mode(self, mode: str) -> "KernelSpec":
        return KernelSpec(mode, self.ell, self.eta, self.J, self.min_gap)


def short_mask(spec: KernelSpec, N: int) -> np.ndarray:
    """Pairs (i, j), i != j, with i, j in J and |i - j| <= ell."""
    lo, hi = spec.bulk(N)
    idx = np.arange(N)
    inJ = (idx >= lo) & (idx < hi)
    d = np.abs(idx[:, None] - idx[None, :])
    return inJ[:, None] & inJ[None, :] & (d <= spec.ell) & (d > 0)


def pattern(spec: KernelSpec, N: int) -> np.ndarray:
    """Boolean support of the kernel; independent of the eigenvalues."""
    if spec.short:
        return short_mask(spec, N)
    return ~np.eye(N, dtype=bool)


def _gaps(lam: np.ndarray) -> np.ndarray:
    lam = np.asarray(lam, dtype=float)
    if np.any(np.diff(lam) < 0):
        raise KernelError("eigenvalue snapshot must be sorted")
    return lam[:, None] - lam[None, :]


def kernel_matrix(spec: KernelSpec, lam: np.ndarray) -> np.ndarray:
    lam = np.asarray(lam, dtype=float)
    N = lam.shape[0]
    d = _gaps(lam)
    off = ~np.eye(N, dtype=bool)
    if spec.mode in ("a", "a-short"):
        K = spec.eta / (N * (d * d + spec.eta ** 2))
    else:
        close = off & (np.abs(d) < spec.min_gap)
        if spec.mode in ("short", "lattice"):
            close &= short_mask(spec, N)
        if np.any(close):
            i, j = np.argwhere(close)[0]
            raise KernelError(f"eigenvalues {i} and {j} closer than the min-gap floor {spec.min_gap:g}")
        with np.errstate(divide="ignore"):
            K = np.where(off, 1.0 / (N * np.where(off, d * d, 1.0)), 0.0)
    if spec.mode == "lattice":
        idx = np.arange(N)
        sep = np.abs(idx[:, None] - idx[None, :]).astype(float)
        far = np.where(off, N / np.where(off, sep * sep, 1.0), 0.0)
        K = np.where(short_mask(spec, N), K, far)
    elif spec.short:
        K = np.where(short_mask(spec, N), K, 0.0)
    K[~off] = 0.0
    return K


def kernel(spec: KernelSpec, lam: np.ndarray, i: int, j: int) -> float:
    if i == j:
        raise KernelError("kernel is defined for i != j only")
    return float(kernel_matrix(spec, lam)[i, j])
