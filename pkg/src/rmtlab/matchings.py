"""Particle configurations, perfect matchings and the perfect matching observable.

A configuration eta puts eta_i particles on site i. Its doubled vertex set
has 2 eta_i vertices at site i; a perfect matching G of these vertices
contributes P(G) = prod over edges of p_{i1 i2}. Double factorials follow
k!! = k (k-2)!! with (-1)!! = 0!! = 1!! = 1.
"""

from __future__ import annotations

import itertools
import math
from collections import Counter
from dataclasses import dataclass
from typing import Iterable, Iterator, Mapping, Sequence

import numpy as np

MAX_ENUMERATION = 6


class MatchingError(ValueError):
    pass


def double_factorial(k: int) -> int:
    if k < -1:
        raise MatchingError(f"double factorial undefined for {k}")
    out = 1
    while k > 1:
        out *= k
        k -= 2
    return out


@dataclass(frozen=True, order=True)
class Configuration:
    """Sparse particle configuration: sorted (site, count) pairs with count > 0."""

    counts: tuple = ()

    def __post_init__(self):
        sites = [s for s, _ in self.counts]
        if sites != sorted(set(sites)):
            raise MatchingError("configuration sites must be distinct and sorted")
        if any(c <= 0 or int(c) != c for _, c in self.counts):
            raise MatchingError("particle counts must be positive integers")

    @classmethod
    def from_mapping(cls, eta: Mapping[int, int]) -> "Configuration":
        return cls(tuple(sorted((int(s), int(c)) for s, c in eta.items() if c)))

    @classmethod
    def from_sites(cls, sites: Iterable[int]) -> "Configuration":
        return cls(tuple(sorted(Counter(int(s) for s in sites).items())))

    @property
    def n(self) -> int:
        return sum(c for _, c in self.counts)

    @property
    def sites(self) -> tuple:
        return tuple(s for s, _ in self.counts)

    def __getitem__(self, site: int) -> int:
        return dict(self.counts).get(site, 0)

    def particles(self) -> tuple:
        """Sorted particle positions with repetition."""
        return tuple(s for s, c in self.counts for _ in range(c))

    def doubled(self) -> tuple:
        """The canonical (sorted) lattice point x with phi(x) = eta."""
        return tuple(s for s, c in self.counts for _ in range(2 * c))

    def move(self, i: int, j: int) -> "Configuration":
        """eta^{ij}: one particle moved from site i to site j."""
        eta = dict(self.counts)
        if eta.get(i, 0) == 0:
            raise MatchingError(f"no particle at site {i}")
        eta[i] -= 1
        eta[j] = eta.get(j, 0) + 1
        return Configuration.from_mapping(eta)


def is_lattice_point(x: Sequence[int]) -> bool:
    return len(x) % 2 == 0 and all(c % 2 == 0 for c in Counter(x).values())


def phi(x: Sequence[int]) -> Configuration:
    """eta_i = n_i(x) / 2."""
    x = tuple(int(v) for v in x)
    if not is_lattice_point(x):
        raise MatchingError(f"{x} has an odd site multiplicity")
    return Configuration(tuple(sorted((s, c // 2) for s, c in Counter(x).items())))


def moment_factor(eta: Configuration) -> int:
    """M(eta) = prod_i (2 eta_i - 1)!!."""
    return math.prod(double_factorial(2 * c - 1) for _, c in eta.counts)


def vertices(eta: Configuration) -> list:
    return [(s, a) for s, c in eta.counts for a in range(1, 2 * c + 1)]


def _matchings(vs: list) -> Iterator[tuple]:
    if not vs:
        yield ()
        return
    first, rest = vs[0], vs[1:]
    for k, partner in enumerate(rest):
        for tail in _matchings(rest[:k] + rest[k + 1:]):
            yield ((first, partner),) + tail


def enumerate_matchings(eta: Configuration) -> list:
    if eta.n > MAX_ENUMERATION:
        raise MatchingError(f"n = {eta.n} exceeds the enumeration guard {MAX_ENUMERATION}; "
                            "use multigraph_sum instead")
    return list(_matchings(vertices(eta)))


def _table(p) -> np.ndarray:
    return p.p if hasattr(p, "p") else np.asarray(p)


def eval_P(G: Sequence, p) -> complex:
    table = _table(p)
    out = 1.0
    for (i, _), (j, _) in G:
        out = out * table[i, j]
    return out


class MatchingSum:
    """sum_G P(G) over the perfect matchings of one configuration, compiled for repeated evaluation."""

    def __init__(self, eta: Configuration):
        self.eta = eta
        ms = enumerate_matchings(eta)
        n = eta.n
        self.count = len(ms)
        self.rows = np.array([[e[0][0] for e in G] for G in ms], dtype=np.intp).reshape(len(ms), n)
        self.cols = np.array([[e[1][0] for e in G] for G in ms], dtype=np.intp).reshape(len(ms), n)

    def __call__(self, p) -> complex:
        table = _table(p)
        if self.eta.n == 0:
            return 1.0
        return np.sum(np.prod(table[self.rows, self.cols], axis=1))


def f_normalisation(n: int, N: int, a2: float) -> float:
    if a2 <= 0:
        raise MatchingError("<A0^2> must be positive")
    return (N / (2.0 * a2)) ** (n / 2.0) / double_factorial(n - 1)


def f_observable(eta: Configuration, p, a2: float = None, N: int = None) -> float:
    """(N / (2<A0^2>))^{n/2} / (n-1)!! / M(eta) * sum_G P(G) for one sample of overlaps.

    ``p`` is an OverlapTable (which carries N and <A0^2>) or a raw array with
    ``a2`` and ``N`` given explicitly.
    """
    if hasattr(p, "a2"):
        a2 = p.a2 if a2 is None else a2
        N = p.N if N is None else N
    if a2 is None or N is None:
        raise MatchingError("f_observable needs <A0^2> and N")
    if eta.n == 0:
        return 1.0
    total = MatchingSum(eta)(p)
    return float(np.real(total)) * f_normalisation(eta.n, N, a2) / moment_factor(eta)


# 2-regular multigraphs ------------------------------------------------------

def _cycles_through(v: int, rest: tuple) -> Iterator[tuple]:
    yield (v,)
    for k in range(1, len(rest) + 1):
        for subset in itertools.combinations(rest, k):
            if k == 1:
                yield (v,) + subset
                continue
            for perm in itertools.permutations(subset):
                if perm[0] < perm[-1]:  # one orientation per undirected cycle
                    yield (v,) + perm


def enumerate_two_regular(n: int) -> Iterator[tuple]:
    """2-regular multigraphs on {0..n-1} as tuples of cycles (loops and double edges included)."""
    def rec(remaining: tuple):
        if not remaining:
            yield ()
            return
        v, rest = remaining[0], remaining[1:]
        for cyc in _cycles_through(v, rest):
            left = tuple(u for u in rest if u not in cyc)
            for tail in rec(left):
                yield (cyc,) + tail
    yield from rec(tuple(range(n)))


def cycle_weight(k: int) -> int:
    """Number of perfect matchings that realise one given undirected k-cycle.

    Each site carries two vertices; a loop has one realisation, a double edge
    two, and for k >= 3 every site chooses which vertex faces which neighbour,
    giving 2^k. This agrees with (2k-2)!! for k <= 3; for larger k, (2k-2)!!
    counts all (k-1)!/2 cyclic orderings of the k sites together.
    """
    if k < 1:
        raise MatchingError("cycles have at least one vertex")
    if k <= 2:
        return k
    return 2 ** k


def multigraph_sum(j_sites: Sequence[int], p) -> float:
    table = _table(p)
    js = [int(j) for j in j_sites]
    if len(set(js)) != len(js):
        raise MatchingError("multigraph_sum needs distinct sites")
    total = 0.0
    for graph in enumerate_two_regular(len(js)):
        term = 1.0
        for cyc in graph:
            mono = 1.0
            for a, b in zip(cyc, cyc[1:] + cyc[:1]):
                mono = mono * table[js[a], js[b]]
            term = term * cycle_weight(len(cyc)) * mono
        total = total + term
    return total


# Cycle reduction --------------------------------------------------------------

@dataclass(frozen=True)
class ReductionCheck:
    lhs: complex
    rhs: complex

    @property
    def gap(self) -> float:
        return abs(self.lhs - self.rhs)


def a_kernel_rows(lam: np.ndarray, sites: Sequence[int], eta: float) -> np.ndarray:
    """Rows a_{i .} = eta / (N ((lambda_i - lambda_.)^2 + eta^2)) for the given sites."""
    lam = np.asarray(lam)
    d = lam[np.asarray(sites)][:, None] - lam[None, :]
    return eta / (lam.shape[0] * (d * d + eta * eta))


def chain_reduction_check(S, A, i_sites: Sequence[int], eta: float) -> ReductionCheck:
    """sum_j prod_r a_{i_r j_r} p_{j1 j2} ... p_{jk j1} against N^{1-k} <Im G_1 A ... Im G_k A>.

    The left side is a brute-force index sum over the overlap table; the right
    side a dense-inversion resolvent chain.
    """
    from rmtlab.spectral import chain_trace_dense

    sites = [int(i) for i in i_sites]
    if len(set(sites)) != len(sites):
        raise MatchingError("cycle reduction needs distinct sites")
    if eta <= 0:
        raise MatchingError("eta must be positive")
    A = np.asarray(A.centred if hasattr(A, "centred") else A)
    k = len(sites)
    N = S.N
    p = S.overlap_matrix(A)
    a = a_kernel_rows(S.eigenvalues, sites, eta)
    if k <= 4:
        letters = "abcd"[:k]
        terms = [f"{letters[r]}" for r in range(k)]
        pairs = [letters[r] + letters[(r + 1) % k] for r in range(k)]
        expr = ",".join(terms + pairs) + "->"
        lhs = complex(np.einsum(expr, *[a[r] for r in range(k)], *([p] * k), optimize=True))
    else:
        M = np.eye(N, dtype=complex)
        for r in range(k):
            M = M @ (a[r][:, None] * p)
        lhs = complex(np.trace(M))
    zs = [S.eigenvalues[i] + 1j * eta for i in sites]
    rhs = N ** (1 - k) * chain_trace_dense(S.dense_matrix(), [(z, A, True) for z in zs])
    return ReductionCheck(lhs, rhs)
