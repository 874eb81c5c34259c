"""Numerical checks of single-resolvent, two-resolvent and resolvent-chain local laws.

"Very high probability" is read as a pass rate over Monte Carlo samples
(default threshold 96%). Traceless observables are required unless a probe
is explicitly run as a control, in which case the non-traceless failure is
the point of the experiment.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np

from rmtlab.ensemble import GAUSSIAN, EntryDistribution, build_observable, sample_wigner
from rmtlab.rng import derive_seed
from rmtlab.spectral import SpectralData, chain_trace, chain_trace_dense, decompose, m_t, resolvent


class LocalLawError(ValueError):
    pass


class HypothesisWarning(UserWarning):
    """The spectral parameters violate N * min(rho_i eta_i) >= N^eps."""


@dataclass(frozen=True)
class LocalLawProbe:
    zs: tuple
    xi: float = 0.2
    omega: float = 0.1
    eps: float = 0.05
    t: float = 0.0

    def __post_init__(self):
        zs = tuple(complex(z) for z in self.zs)
        if not zs:
            raise LocalLawError("at least one spectral parameter is required")
        for z in zs:
            if z.imag == 0.0:
                raise LocalLawError(f"spectral parameter {z} is real")
        object.__setattr__(self, "zs", zs)

    @property
    def eta_star(self) -> float:
        return min(abs(z.imag) for z in self.zs)

    def rhos(self) -> np.ndarray:
        # rho_i = |Im m(z_i)|, without the 1/pi of the density
        return np.array([abs(m_t(z, self.t).imag) for z in self.zs])

    @property
    def rho_star(self) -> float:
        return float(np.max(self.rhos()))

    def hypothesis(self, N: int) -> bool:
        etas = np.array([abs(z.imag) for z in self.zs])
        return bool(N * np.min(self.rhos() * etas) >= N ** self.eps)

    def in_range(self, N: int) -> bool:
        return all(abs(z.real) <= 3 and N ** (-1 + self.omega) <= abs(z.imag) <= 10 for z in self.zs)


@dataclass
class LawReport:
    name: str
    lhs: float
    rhs: float
    flags: dict = field(default_factory=dict)

    @property
    def ratio(self) -> float:
        return self.lhs / self.rhs if self.rhs > 0 else math.inf

    @property
    def passed(self) -> bool:
        return bool(self.lhs <= self.rhs)


@dataclass
class SingleGReport:
    entry: LawReport
    average: LawReport
    max_diag: float
    max_offdiag: float

    @property
    def passed(self) -> bool:
        return self.entry.passed and self.average.passed


def _check_traceless(A: np.ndarray, control: bool, tol: float = 1e-10) -> np.ndarray:
    A = np.asarray(A)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise LocalLawError("observable must be a square matrix")
    mean = np.trace(A) / A.shape[0]
    if not control and abs(mean) > tol * max(1.0, float(np.max(np.abs(A)))):
        raise LocalLawError(f"observable is not traceless (<A> = {mean:.3e}); pass control=True for a control run")
    return A


def check_single_g(S: SpectralData, z: complex, xi: float = 0.2, t: float = 0.0) -> SingleGReport:
    """max_ab |G_ab - delta_ab m| against N^xi / sqrt(N eta), and |<G> - m| against N^xi / (N eta)."""
    z = complex(z)
    if z.imag <= 0:
        raise LocalLawError("check_single_g needs Im z > 0")
    N = S.N
    m = complex(m_t(z, t))
    G = resolvent(S, z)
    diag = np.diagonal(G)
    dev = np.abs(G - m * np.eye(N))
    off = np.abs(G)
    np.fill_diagonal(off, 0.0)
    eta = z.imag
    entry = LawReport("entrywise", float(np.max(dev)), N ** xi / math.sqrt(N * eta))
    average = LawReport("average", float(abs(np.mean(diag) - m)), N ** xi / (N * eta))
    return SingleGReport(entry, average, float(np.max(np.abs(diag))), float(np.max(off)))


def two_g_lhs(S: SpectralData, A: np.ndarray, z1: complex, z2: complex) -> complex:
    """<Im G(z1) A Im G(z2) A>."""
    return chain_trace(S, [(z1, A, True), (z2, A, True)])


def check_two_g(S: SpectralData, A: np.ndarray, z1: complex, z2: complex, xi: float = 0.2, const: float = 1.0,
                t: float = 0.0, control: bool = False) -> LawReport:
    """|<Im G1 A Im G2 A> - Im m1 Im m2 <A^2>| / (rho1 rho2) against const N^xi / sqrt(N eta*)."""
    A = _check_traceless(A, control)
    N = S.N
    probe = LocalLawProbe((z1, z2), xi=xi, t=t)
    lhs = two_g_lhs(S, A, z1, z2)
    m1, m2 = m_t(complex(z1), t), m_t(complex(z2), t)
    a2 = float(np.real(np.trace(A @ A))) / N
    rho = probe.rhos()
    dev = abs(lhs - m1.imag * m2.imag * a2) / (rho[0] * rho[1])
    rhs = const * N ** xi / math.sqrt(N * probe.eta_star)
    return LawReport("two-g", float(dev), rhs, {"lhs": lhs, "control": control})


def check_chain(S: SpectralData, As: Sequence[Optional[np.ndarray]], zs: Sequence[complex], xi: float = 0.25,
                eps: float = 0.05, t: float = 0.0, control: bool = False) -> LawReport:
    """|<G1 A1 ... Gk Ak>| against N^{xi + (k-3)/2} sqrt(rho*/eta*).

    A hypothesis violation is flagged (and warned about) but the probe still runs.
    """
    k = len(zs)
    if k < 3:
        raise LocalLawError("chain bound is stated for k >= 3")
    if len(As) != k:
        raise LocalLawError("need one observable per resolvent")
    As = [_check_traceless(A, control) if A is not None else None for A in As]
    if any(A is None for A in As) and not control:
        raise LocalLawError("identity factors are only allowed in control runs")
    N = S.N
    probe = LocalLawProbe(tuple(zs), xi=xi, eps=eps, t=t)
    ok = probe.hypothesis(N)
    if not ok:
        warnings.warn(f"N min(rho eta) < N^{eps}: chain bound hypothesis violated", HypothesisWarning, stacklevel=2)
    lhs = chain_trace(S, list(zip(zs, As)))
    rhs = N ** (xi + (k - 3) / 2.0) * math.sqrt(probe.rho_star / probe.eta_star)
    return LawReport(f"chain-{k}", float(abs(lhs)), rhs, {"hypothesis": ok, "control": control})


def dense_agreement(S: SpectralData, specs: Sequence, max_n: int = 128) -> float:
    """Relative gap between the eigenbasis chain trace and dense resolvent products."""
    if S.N > max_n:
        raise LocalLawError(f"dense cross-check limited to N <= {max_n}")
    a = chain_trace(S, specs)
    b = chain_trace_dense(S.dense_matrix(), specs)
    return abs(a - b) / max(abs(b), 1e-300)


# Monte Carlo runners -------------------------------------------------------------

def pass_rate(reports: Iterable) -> float:
    reports = list(reports)
    if not reports:
        raise LocalLawError("no reports")
    return sum(bool(r.passed) for r in reports) / len(reports)


def meets_threshold(reports: Iterable, threshold: float = 0.96) -> bool:
    return pass_rate(reports) >= threshold


def _spectra(N: int, M: int, seed: int, beta: int, dist: EntryDistribution):
    for k in range(M):
        yield decompose(sample_wigner(N, beta, dist, derive_seed(seed, k)), validate=False)


def run_single_g(N: int, M: int, z: complex, seed: int = 0, xi: float = 0.2, beta: int = 1,
                 dist: EntryDistribution = GAUSSIAN) -> list:
    return [check_single_g(S, z, xi) for S in _spectra(N, M, seed, beta, dist)]


def run_two_g(N: int, M: int, eta: float, E: float = 0.0, seed: int = 0, xi: float = 0.0, const: float = 5.0,
              beta: int = 1, observable: Optional[np.ndarray] = None, conjugate: bool = False,
              control: bool = False, dist: EntryDistribution = GAUSSIAN) -> list:
    """Two-G deviation per sample at z1 = E + i eta and z2 = z1 (or its conjugate)."""
    A = build_observable(N, "random-symmetric", seed).matrix if observable is None else observable
    z1 = complex(E, eta)
    z2 = z1.conjugate() if conjugate else z1
    return [check_two_g(S, A, z1, z2, xi, const, control=control) for S in _spectra(N, M, seed, beta, dist)]


def run_chain(N: int, M: int, eta: float, k: int = 3, E: float = 0.0, seed: int = 0, xi: float = 0.25,
              beta: int = 1, observable: Optional[np.ndarray] = None, identity_slots: Sequence[int] = (),
              alternate: bool = True, dist: EntryDistribution = GAUSSIAN) -> list:
    """k-chain bound per sample; ``identity_slots`` replaces those observables by the identity (control).

    With ``alternate`` the spectral parameters alternate z, conj(z), z, ...; this is
    the configuration in which non-traceless chains blow up like eta^{1-k}.
    """
    A = build_observable(N, "random-symmetric", seed).matrix if observable is None else observable
    As = [None if r in identity_slots else A for r in range(k)]
    z = complex(E, eta)
    zs = [z.conjugate() if alternate and r % 2 else z for r in range(k)]
    control = bool(identity_slots)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", HypothesisWarning)
        return [check_chain(S, As, zs, xi, control=control) for S in _spectra(N, M, seed, beta, dist)]


def eta_sweep(N: int, M: int, etas: Sequence[float], seed: int = 0, xi: float = 0.0, const: float = 5.0,
              beta: int = 1) -> list:
    """(eta, mean two-G deviation, bound) triples sorted by eta."""
    rows = []
    for eta in sorted(etas):
        reps = run_two_g(N, M, eta, seed=seed, xi=xi, const=const, beta=beta)
        rows.append((float(eta), float(np.mean([r.lhs for r in reps])), reps[0].rhs))
    return rows
