"""Configuration spaces for the moment flow.

States are multisets of n particle sites, stored as sorted n-tuples. The
doubled representation x in Lambda^n repeats each particle twice. A function
on Lambda^n that is symmetric under coordinate permutations is a function on
these multisets; sums over ordered tuples pick up the multiplicity
(2n)! / prod_i n_i(x)!.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

import numpy as np

from rmtlab.matchings import Configuration, double_factorial


class LatticeError(ValueError):
    pass


def occupations(particles: Sequence[int]) -> dict:
    out: dict = {}
    for s in particles:
        out[s] = out.get(s, 0) + 1
    return out


def pi_weight(particles: Sequence[int]) -> int:
    """pi(x) = prod_i ((n_i(x) - 1)!!)^2 with n_i(x) = 2 eta_i."""
    return math.prod(double_factorial(2 * c - 1) ** 2 for c in occupations(particles).values())


def multiplicity(particles: Sequence[int]) -> int:
    """Number of ordered 2n-tuples with the given doubled multiset."""
    n = len(particles)
    return math.factorial(2 * n) // math.prod(math.factorial(2 * c) for c in occupations(particles).values())


def doubled(particles: Sequence[int]) -> tuple:
    return tuple(s for s in sorted(particles) for _ in range(2))


def l1_distance(p: Sequence[int], q: Sequence[int]) -> int:
    """||x - y||_1 between the sorted doubled tuples of two particle multisets."""
    return 2 * sum(abs(a - b) for a, b in zip(sorted(p), sorted(q)))


def _ball(center: tuple, budget: int, lo: int, hi: int) -> Iterable[tuple]:
    """Sorted tuples q with lo <= q_r < hi and sum |q_r - center_r| <= budget."""
    n = len(center)

    def rec(r: int, start: int, left: int, prefix: tuple):
        if r == n:
            yield prefix
            return
        c = center[r]
        for v in range(max(start, c - left, lo), min(hi - 1, c + left) + 1):
            yield from rec(r + 1, v, left - abs(v - c), prefix + (v,))

    yield from rec(0, lo, budget, ())


class StateSpace:
    """Finite set of n-particle configurations on sites {0, ..., N-1}."""

    def __init__(self, N: int, n: int, states: Iterable[Sequence[int]]):
        self.N = int(N)
        self.n = int(n)
        rows = sorted({tuple(sorted(int(s) for s in st)) for st in states})
        if not rows:
            raise LatticeError("empty state space")
        for r in rows:
            if len(r) != self.n or r[0] < 0 or r[-1] >= self.N:
                raise LatticeError(f"state {r} is not an {self.n}-particle configuration on [0, {self.N})")
        self.states = rows
        self.particles = np.array(rows, dtype=np.intp).reshape(len(rows), self.n)
        self.index = {r: k for k, r in enumerate(rows)}
        self.pi = np.array([pi_weight(r) for r in rows], dtype=float)
        self.mult = np.array([multiplicity(r) for r in rows], dtype=float)
        self.weight = self.pi * self.mult

    @classmethod
    def full(cls, N: int, n: int, sites: Optional[Sequence[int]] = None) -> "StateSpace":
        sites = range(N) if sites is None else sites
        return cls(N, n, itertools.combinations_with_replacement(sorted(sites), n))

    @classmethod
    def ball(cls, N: int, n: int, center: Sequence[int], radius: int) -> "StateSpace":
        """States whose doubled l1 distance to ``center`` is at most ``radius``."""
        c = tuple(sorted(center))
        return cls(N, n, _ball(c, int(radius) // 2, 0, N))

    def __len__(self) -> int:
        return len(self.states)

    def configuration(self, k: int) -> Configuration:
        return Configuration.from_sites(self.states[k])

    def doubled(self, k: int) -> tuple:
        return doubled(self.states[k])

    def distinct(self) -> np.ndarray:
        """States whose particles sit on pairwise distinct sites."""
        if self.n < 2:
            return np.ones(len(self), dtype=bool)
        return np.all(np.diff(self.particles, axis=1) > 0, axis=1)

    def l1_to(self, center: Sequence[int]) -> np.ndarray:
        c = np.array(sorted(center))
        return 2 * np.abs(self.particles - c[None, :]).sum(axis=1)

    def inner(self, f: np.ndarray, g: np.ndarray, measure: str = "pi") -> float:
        """<f, g> over ordered tuples of Lambda^n with measure pi (default) or mu = 1."""
        w = self.weight if measure == "pi" else self.mult
        return float(np.sum(w * np.conj(f) * g).real)

    def norm(self, f: np.ndarray, p: float = 2) -> float:
        if p == np.inf:
            return float(np.max(np.abs(f), initial=0.0))
        return float(np.sum(self.weight * np.abs(f) ** p) ** (1.0 / p))


@dataclass(frozen=True)
class AvWindow:
    center: tuple
    K: int

    def __post_init__(self):
        if int(self.K) != self.K or self.K < 1:
            raise LatticeError(f"window width K must be a positive integer, got {self.K}")

    def check(self, N: int, J: Optional[tuple] = None) -> None:
        if self.K > math.ceil(math.sqrt(N)):
            raise LatticeError(f"AvWindow needs K <= ceil(sqrt(N)) = {math.ceil(math.sqrt(N))}, got K={self.K}")
        if J is not None and not all(J[0] <= s < J[1] for s in self.center):
            raise LatticeError(f"window centre {self.center} is not supported on J = [{J[0]}, {J[1]})")


def av(particles: Sequence[int], window: AvWindow) -> float:
    """(1/K) sum_{j=K}^{2K-1} 1(||x - y||_1 < j), on sorted doubled tuples."""
    d = l1_distance(particles, window.center)
    K = window.K
    return sum(1 for j in range(K, 2 * K) if d < j) / K


def av_vector(space: StateSpace, window: AvWindow) -> np.ndarray:
    d = space.l1_to(window.center)
    K = window.K
    return np.clip((2 * K - 1 - np.maximum(d, K - 1)) / K, 0.0, 1.0)


def distance(p: Sequence[int], q: Sequence[int], J: tuple) -> int:
    """sup_a |J cap [min(x_a, y_a), max(x_a, y_a))| on sorted tuples; J is a half-open index range."""
    lo, hi = J
    out = 0
    for a, b in zip(sorted(p), sorted(q)):
        m, M = min(a, b), max(a, b)
        out = max(out, max(0, min(M, hi) - max(m, lo)))
    return out


def distance_vector(space: StateSpace, q: Sequence[int], J: tuple) -> np.ndarray:
    c = np.array(sorted(q))
    m = np.minimum(space.particles, c[None, :])
    M = np.maximum(space.particles, c[None, :])
    width = np.clip(np.minimum(M, J[1]) - np.maximum(m, J[0]), 0, None)
    return width.max(axis=1)
