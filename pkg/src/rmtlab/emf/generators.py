"""Markov generators of the eigenvector moment flow.

On configurations, B moves one particle from i to j at rate
c_ij * 2 eta_i (1 + 2 eta_j). On the doubled space Lambda^n the generator
L_ij moves a pair of coordinates equal to i to j, with prefactor
(n_j(x) + 1) / (n_i(x) - 1); summed over ordered pairs a != b this is the same
rate, so L is B read through phi. S and W are L with the short-range and
lattice kernels. A moves all n pairs at once with product weights
prod_r a^S_{i_r j_r} / eta and is reversible for the counting measure.

Matrices act on functions stored per multiset state of a StateSpace.
Transitions that leave a truncated space are kept on the diagonal as killing.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np
import scipy.sparse as sp

from rmtlab.emf.kernels import KernelSpec, kernel_matrix, pattern
from rmtlab.emf.lattice import StateSpace, occupations
from rmtlab.matchings import Configuration


@dataclass(frozen=True, eq=False)
class FlowState:
    space: StateSpace
    values: np.ndarray
    t: float = 0.0

    def norm(self, p: float = 2) -> float:
        return self.space.norm(self.values, p)

    def at(self, particles: Sequence[int]) -> float:
        k = self.space.index.get(tuple(sorted(particles)))
        return 0.0 if k is None else float(self.values[k])

    def replace(self, values: np.ndarray, t: float = None) -> "FlowState":
        return FlowState(self.space, values, self.t if t is None else t)


@dataclass(frozen=True, eq=False)
class Transitions:
    """Kernel-independent jump structure: state src moves one particle i -> j to dst (-1 if outside)."""

    src: np.ndarray
    dst: np.ndarray
    i: np.ndarray
    j: np.ndarray
    factor: np.ndarray
    size: int = 0


def one_particle_transitions(space: StateSpace, support: np.ndarray) -> Transitions:
    src, dst, ii, jj, fac = [], [], [], [], []
    targets = [np.flatnonzero(support[i]) for i in range(space.N)]
    for k, st in enumerate(space.states):
        occ = occupations(st)
        for i, ci in occ.items():
            rest = list(st)
            rest.remove(i)
            for j in targets[i]:
                j = int(j)
                new = tuple(sorted(rest + [j]))
                src.append(k)
                dst.append(space.index.get(new, -1))
                ii.append(i)
                jj.append(j)
                fac.append(2 * ci * (1 + 2 * occ.get(j, 0)))
    as_int = lambda v: np.asarray(v, dtype=np.intp)
    return Transitions(as_int(src), as_int(dst), as_int(ii), as_int(jj), np.asarray(fac, dtype=float), len(space))


@dataclass(eq=False)
class Generator:
    """Sparse generator Q with (Qh)(x) = sum_y Q_xy h(y), its reversible weights and killing rates."""

    Q: sp.csr_matrix
    weight: np.ndarray
    kill: np.ndarray
    name: str = "L"
    offdiag: sp.csr_matrix = field(default=None, repr=False)

    @property
    def exit_rates(self) -> np.ndarray:
        return -self.Q.diagonal()

    def __matmul__(self, h: np.ndarray) -> np.ndarray:
        return self.Q @ h

    def quadratic(self, h: np.ndarray) -> float:
        """<h, Q h> in the reversible measure."""
        return float(np.sum(self.weight * h * (self.Q @ h)))

    def dirichlet(self, h: np.ndarray) -> float:
        """Sum-of-squares form 1/2 sum w_x Q_xy (h_y - h_x)^2 + sum w_x kill_x h_x^2."""
        R = self.offdiag.tocoo()
        diff = h[R.col] - h[R.row]
        return float(0.5 * np.sum(self.weight[R.row] * R.data * diff * diff) + np.sum(self.weight * self.kill * h * h))


def _assemble(n_states: int, src, dst, rates, weight, name) -> Generator:
    inside = dst >= 0
    R = sp.csr_matrix((rates[inside], (src[inside], dst[inside])), shape=(n_states, n_states))
    R.sum_duplicates()
    total = np.bincount(src, weights=rates, minlength=n_states)
    kill = np.bincount(src[~inside], weights=rates[~inside], minlength=n_states)
    Q = (R - sp.diags(total)).tocsr()
    return Generator(Q, weight, kill, name, R)


def moment_flow_generator(space: StateSpace, lam: np.ndarray, spec: KernelSpec,
                          trans: Transitions = None) -> Generator:
    """L (spec.mode='full'), S ('short') or W ('lattice') on the multiset states of ``space``."""
    if trans is None:
        trans = one_particle_transitions(space, pattern(spec, space.N))
    K = kernel_matrix(spec, lam)
    rates = K[trans.i, trans.j] * trans.factor
    name = {"full": "L", "short": "S", "lattice": "W"}.get(spec.mode, spec.mode)
    return _assemble(len(space), trans.src, trans.dst, rates, space.weight, name)


def a_generator(space: StateSpace, lam: np.ndarray, spec: KernelSpec) -> Generator:
    """The product-kernel generator A; only configurations with n distinct sites move.

    From sites s_1 < ... < s_n to a disjoint set of distinct sites T the rate is
    n! 2^n / eta * sum over bijections sigma of prod_r a^S_{s_r sigma(s_r)}.
    The reversible measure is mu = 1 on ordered tuples, i.e. the multiplicity here.
    """
    if spec.mode not in ("a", "a-short"):
        spec = spec.with_mode("a-short")
    a = kernel_matrix(spec, lam)
    n = space.n
    pref = math.factorial(n) * 2 ** n / spec.eta
    reach = [np.flatnonzero(a[i] > 0) for i in range(space.N)]
    distinct = space.distinct()
    src, dst, rates = [], [], []
    for k, st in enumerate(space.states):
        if not distinct[k]:
            continue
        occupied = set(st)
        cand = sorted(set().union(*(set(reach[s].tolist()) for s in st)) - occupied)
        for T in itertools.combinations(cand, n):
            total = 0.0
            for perm in itertools.permutations(T):
                total += math.prod(a[s, t] for s, t in zip(st, perm))
            if total == 0.0:
                continue
            src.append(k)
            dst.append(space.index.get(T, -1))
            rates.append(pref * total)
    src = np.asarray(src, dtype=np.intp)
    dst = np.asarray(dst, dtype=np.intp)
    return _assemble(len(space), src, dst, np.asarray(rates, dtype=float), space.mult.astype(float), "A")


def apply(gen: Generator, h: FlowState) -> FlowState:
    return h.replace(gen.Q @ h.values)


def apply_L(h: FlowState, lam: np.ndarray, spec: KernelSpec = KernelSpec("full")) -> FlowState:
    return apply(moment_flow_generator(h.space, lam, spec.with_mode("full")), h)


def apply_S(h: FlowState, lam: np.ndarray, spec: KernelSpec) -> FlowState:
    return apply(moment_flow_generator(h.space, lam, spec.with_mode("short")), h)


def apply_W(h: FlowState, lam: np.ndarray, spec: KernelSpec) -> FlowState:
    return apply(moment_flow_generator(h.space, lam, spec.with_mode("lattice")), h)


def apply_A(h: FlowState, lam: np.ndarray, spec: KernelSpec) -> FlowState:
    return apply(a_generator(h.space, lam, spec), h)


# Literal evaluations used as oracles -----------------------------------------

def apply_B(f: Mapping[Configuration, float] | Callable[[Configuration], float],
            configs: Sequence[Configuration], lam: np.ndarray, spec: KernelSpec = KernelSpec("full")) -> dict:
    """(Bf)(eta) = sum_{i != j} c_ij 2 eta_i (1 + 2 eta_j) (f(eta^{ij}) - f(eta)), term by term."""
    get = f if callable(f) else f.__getitem__
    K = kernel_matrix(spec, lam)
    N = K.shape[0]
    out = {}
    for eta in configs:
        base = get(eta)
        total = 0.0
        for i in eta.sites:
            for j in range(N):
                if j == i or K[i, j] == 0.0:
                    continue
                total += K[i, j] * 2 * eta[i] * (1 + 2 * eta[j]) * (get(eta.move(i, j)) - base)
        out[eta] = total
    return out


def jump(x: tuple, i: int, j: int, a: int, b: int) -> tuple:
    """x^{ij}_{ab}: coordinates a and b move from i to j if both equal i."""
    if x[a] != i or x[b] != i:
        return x
    y = list(x)
    y[a] = y[b] = j
    return tuple(y)


def apply_L_tuple(h: Callable[[tuple], float], x: tuple, K: np.ndarray) -> float:
    """(L h)(x) on an ordered tuple x, straight from the pair-jump definition."""
    N = K.shape[0]
    counts = occupations(x)
    base = h(x)
    total = 0.0
    for i, ni in counts.items():
        for j in range(N):
            if j == i or K[i, j] == 0.0:
                continue
            pref = K[i, j] * (counts.get(j, 0) + 1) / (ni - 1)
            s = 0.0
            for a in range(len(x)):
                for b in range(len(x)):
                    if a != b:
                        s += h(jump(x, i, j, a, b)) - base
            total += pref * s
    return total


def multi_jump(x: tuple, I: tuple, J: tuple, A: tuple, B: tuple) -> tuple:
    if not all(x[a] == i and x[b] == i for i, a, b in zip(I, A, B)):
        return x
    y = list(x)
    for j, a, b in zip(J, A, B):
        y[a] = y[b] = j
    return tuple(y)


def apply_A_tuple(h: Callable[[tuple], float], x: tuple, a: np.ndarray, eta: float) -> float:
    """(A h)(x) on an ordered tuple, summing over all distinct index tuples i, j and positions a, b."""
    N = a.shape[0]
    n = len(x) // 2
    base = h(x)
    total = 0.0
    for idx in itertools.permutations(range(N), 2 * n):
        I, J = idx[:n], idx[n:]
        w = math.prod(a[i, j] for i, j in zip(I, J))
        if w == 0.0:
            continue
        s = 0.0
        for pos in itertools.permutations(range(2 * n), 2 * n):
            s += h(multi_jump(x, I, J, pos[:n], pos[n:])) - base
        total += w * s
    return total / eta
