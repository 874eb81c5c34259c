"""Experiments on the moment flow: Dirichlet-form replacement, L2 decay, relaxation, generator algebra."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from rmtlab.emf.flow import TrajectorySource, integrate
from rmtlab.emf.generators import (
    FlowState,
    a_generator,
    apply_A_tuple,
    apply_B,
    apply_L_tuple,
    moment_flow_generator,
)
from rmtlab.emf.kernels import KernelSpec, bulk_set, kernel_matrix
from rmtlab.emf.lattice import AvWindow, StateSpace, av_vector, doubled
from rmtlab.ensemble import (
    GAUSSIAN,
    EntryDistribution,
    Observable,
    build_observable,
    ou_mix,
    sample_wigner,
)
from rmtlab.matchings import Configuration, MatchingSum, f_normalisation, moment_factor, phi
from rmtlab.rng import derive_seed, make_rng
from rmtlab.spectral import decompose, eigen_window, quantiles


class ParameterOrderError(ValueError):
    """A scale hierarchy between the experiment parameters is violated."""


# Dirichlet-form replacement -----------------------------------------------------

@dataclass(frozen=True)
class ReplacementReport:
    samples: int
    resampled: int
    max_ratio: float
    min_ratio: float
    sharp_constant: float
    both_hold: bool
    batch_constants: tuple
    worst_S: float
    worst_A: float


def sharp_replacement_constant(S_form: np.ndarray, A_form: np.ndarray, tol: float = 1e-10) -> float:
    """Largest C with D_S(h) >= C D_A(h) for all h, from the generalised eigenproblem.

    D_S and D_A are the (positive semidefinite) Dirichlet matrices; the kernel of D_S
    must be contained in the kernel of D_A.
    """
    ev, V = np.linalg.eigh(S_form)
    scale = max(float(np.max(np.abs(ev))), 1e-300)
    rng_mask = ev > tol * scale
    Vk = V[:, ~rng_mask]
    if Vk.size and np.max(np.abs(A_form @ Vk)) > 1e-8 * max(1.0, float(np.max(np.abs(A_form)))):
        return 0.0
    Vr = V[:, rng_mask] / np.sqrt(ev[rng_mask])[None, :]
    M = Vr.T @ A_form @ Vr
    kappa = float(np.max(np.linalg.eigvalsh(0.5 * (M + M.T))))
    return math.inf if kappa <= 0 else 1.0 / kappa


def replacement_check(N: int = 16, n: int = 2, eta: float = 0.05, ell: int = 8, delta: float = 0.2,
                      samples: int = 1000, seed: int = 0, lam: Optional[np.ndarray] = None,
                      batches: int = 2) -> ReplacementReport:
    """<h, S h>_pi <= C <h, A h>_mu <= 0 on random h, with the empirical and sharp constants."""
    lam = quantiles(0.0, N) if lam is None else np.asarray(lam)
    J = bulk_set(N, delta)
    space = StateSpace.full(N, n)
    S = moment_flow_generator(space, lam, KernelSpec("short", ell=ell, J=J))
    A = a_generator(space, lam, KernelSpec("a-short", ell=ell, eta=eta, J=J))
    S_form = -(np.diag(S.weight) @ S.Q.toarray())
    A_form = -(np.diag(A.weight) @ A.Q.toarray())
    S_form = 0.5 * (S_form + S_form.T)
    A_form = 0.5 * (A_form + A_form.T)
    C = sharp_replacement_constant(S_form, A_form)
    rng = make_rng(seed)
    ratios, resampled = [], 0
    worst_S = -math.inf
    worst_A = -math.inf
    holds = True
    while len(ratios) < samples:
        h = rng.standard_normal(len(space))
        qs = S.quadratic(h)
        qa = A.quadratic(h)
        if qa >= -1e-14 * max(1.0, abs(qs)):
            resampled += 1
            if resampled > 10 * samples:
                raise RuntimeError("A-form vanishes on almost every sample")
            continue
        worst_S = max(worst_S, qs - C * qa)
        worst_A = max(worst_A, qa)
        holds &= qs <= C * qa * (1 - 1e-9) + 1e-12 and qa <= 0
        ratios.append(qs / qa)
    ratios = np.array(ratios)
    parts = np.array_split(ratios, batches)
    return ReplacementReport(samples, resampled, float(ratios.max()), float(ratios.min()), C, bool(holds),
                             tuple(float(p.min()) for p in parts), float(worst_S), float(worst_A))


# L2 decay ---------------------------------------------------------------------

def error_budget(N: int, n: int, K: int, ell: int, T1: float, eta: float, xi: float = 0.05,
                 eps: float = 0.05) -> float:
    """N^{n xi} (N^eps ell/K + N T1/ell + N eta/ell + N^eps/sqrt(N eta) + 1/sqrt(K))."""
    return N ** (n * xi) * (N ** eps * ell / K + N * T1 / ell + N * eta / ell
                            + N ** eps / math.sqrt(N * eta) + 1.0 / math.sqrt(K))


def check_scale_order(N: int, K: int, ell: int, T1: float, eta: float, gap_exponent: float = 0.05) -> None:
    """Enforce 1/N << eta << T1 << ell/N << K/N with ratio >= N^gap and K <= ceil(sqrt N)."""
    r = N ** gap_exponent
    chain = [("1/N ≪ η", 1.0 / N, eta), ("η ≪ T1", eta, T1), ("T1 ≪ ℓ/N", T1, ell / N),
             ("ℓ/N ≪ K/N", ell / N, K / N)]
    for name, small, big in chain:
        if not big >= r * small:
            raise ParameterOrderError(f"{name} violated: need ratio >= N^{gap_exponent} = {r:.4g}, "
                                      f"got {big / small:.4g}")
    if K > math.ceil(math.sqrt(N)):
        raise ParameterOrderError(f"AvWindow needs K <= ceil(sqrt(N)) = {math.ceil(math.sqrt(N))}, got K={K}")


def default_eta(N: int, T1: float) -> float:
    """Geometric midpoint of the admissible window (N^0.05/N, T1/N^0.05)."""
    r = N ** 0.05
    return math.sqrt((r / N) * (T1 / r))


def goe_g0(N: int, n: int, seed: int, observable: Optional[Observable] = None) -> Callable[[Sequence[int]], float]:
    """Single-sample perfect matching observable of one GOE matrix, as a function of particle sites."""
    S = decompose(sample_wigner(N, 1, GAUSSIAN, derive_seed(seed, 0)), validate=False)
    obs = observable or build_observable(N, "random-symmetric", seed=derive_seed(seed, 0, 1))
    p = S.overlap_matrix(obs.centred).real
    norm = f_normalisation(n, N, obs.a2)
    cache = {}

    def g0(particles: Sequence[int]) -> float:
        eta = Configuration.from_sites(particles)
        if eta not in cache:
            cache[eta] = MatchingSum(eta)
        return float(cache[eta](p)) * norm / moment_factor(eta)

    return g0


@dataclass
class DecayReport:
    times: np.ndarray
    norms: np.ndarray
    envelope: float
    budget: float
    killed: float
    outer_mass: float
    params: dict = field(default_factory=dict)

    @property
    def endpoint_ratio(self) -> float:
        return float(self.norms[-1] / self.envelope)

    @property
    def nonincreasing(self) -> bool:
        return bool(np.all(np.diff(self.norms) <= 1e-12 * self.norms[0]))

    @property
    def strictly_decreasing(self) -> bool:
        return bool(np.all(np.diff(self.norms) < 0))


def l2_decay_experiment(N: int = 200, n: int = 2, K: int = 14, ell: int = 5, T1: Optional[float] = None,
                        eta: Optional[float] = None, delta: float = 0.2, seed: int = 0,
                        center: Optional[Sequence[int]] = None, g0: Optional[Callable] = None,
                        source: Optional[TrajectorySource] = None, xi: float = 0.05, eps: float = 0.05,
                        records: int = 40, radius: Optional[int] = None) -> DecayReport:
    """Evolve h0 = Av (g0 - 1(n even)) under the short-range flow up to T1."""
    T1 = math.sqrt(K) / N if T1 is None else T1
    eta = default_eta(N, T1) if eta is None else eta
    check_scale_order(N, K, ell, T1, eta)
    J = bulk_set(N, delta)
    if center is None:
        center = tuple(N // 2 + r for r in range(n))
    window = AvWindow(tuple(sorted(center)), K)
    window.check(N, J)
    radius = 4 * K if radius is None else radius
    space = StateSpace.ball(N, n, center, radius)
    g0 = goe_g0(N, n, seed) if g0 is None else g0
    shift = 1.0 if n % 2 == 0 else 0.0
    a = av_vector(space, window)
    h0 = np.array([a[k] * (g0(space.states[k]) - shift) if a[k] > 0 else 0.0 for k in range(len(space))])
    source = TrajectorySource.frozen_quantiles(N) if source is None else source
    spec = KernelSpec("short", ell=ell, J=J)
    grid = np.linspace(0.0, T1, records + 1)[1:]
    path = integrate(FlowState(space, h0), source, [(0.0, spec)], T1, record=grid)
    norms = path.norms(2)
    budget = error_budget(N, n, K, ell, T1, eta, xi, eps)
    outer = space.l1_to(center) > 3 * K
    final = path.final.values
    outer_mass = float(np.sum(space.weight[outer] * np.abs(final[outer])))
    return DecayReport(np.array(path.times), norms, K ** (n / 2) * budget, budget, path.killed, outer_mass,
                       dict(N=N, n=n, K=K, ell=ell, T1=T1, eta=eta, J=J, xi=xi, eps=eps, states=len(space)))


# Relaxation of the perfect matching observable ---------------------------------

def default_configurations(N: int, n: int) -> list:
    c = N // 2
    out = [Configuration.from_mapping({c: n}), Configuration.from_sites(range(c, c + n))]
    if n >= 3:
        out.append(Configuration.from_mapping({c: n - 1, c + 1: 1}))
    return out


@dataclass
class RelaxationReport:
    configurations: list
    means: np.ndarray
    stderr: np.ndarray
    target: float
    samples: int

    @property
    def gaps(self) -> np.ndarray:
        return np.abs(self.means - self.target)

    @property
    def sup_gap(self) -> float:
        return float(np.max(self.gaps))


def relaxation_experiment(n: int, N: int, M: int, T: float, seed: int = 0,
                          dist: EntryDistribution = EntryDistribution("rademacher"),
                          configurations: Optional[Sequence[Configuration]] = None,
                          observable: Optional[Observable] = None, delta: float = 0.2) -> RelaxationReport:
    """Monte Carlo f_T(eta) for bulk configurations; the start is OU-evolved for time T."""
    configs = list(configurations or default_configurations(N, n))
    J = bulk_set(N, delta)
    sites = sorted({s for c in configs for s in c.sites})
    if sites[0] < J[0] or sites[-1] >= J[1]:
        raise ParameterOrderError(f"configurations must lie in the bulk window [{J[0]}, {J[1]})")
    if T < 0:
        raise ValueError("flow time must be nonnegative")
    lo, hi = sites[0], sites[-1] + 1
    obs = observable or build_observable(N, "random-symmetric", seed=derive_seed(seed, 2 ** 32))
    A0 = obs.centred
    sums = [MatchingSum(Configuration(tuple((s - lo, c) for s, c in cfg.counts))) for cfg in configs]
    scale = np.array([f_normalisation(cfg.n, N, obs.a2) / moment_factor(cfg) for cfg in configs])
    vals = np.empty((M, len(configs)))
    for k in range(M):
        W = sample_wigner(N, 1, dist, derive_seed(seed, k, 0))
        if T > 0:
            W = ou_mix(W, sample_wigner(N, 1, GAUSSIAN, derive_seed(seed, k, 1)), T)
        _, U = eigen_window(W, lo, hi)
        p = U.T @ A0 @ U
        vals[k] = [float(ms(p)) for ms in sums] * scale
    target = 1.0 if n % 2 == 0 else 0.0
    return RelaxationReport(configs, vals.mean(axis=0), vals.std(axis=0, ddof=1) / math.sqrt(M), target, M)


# Generator algebra -----------------------------------------------------------------

def algebra_suite(N: int = 8, n: int = 2, ell: int = 3, eta: float = 0.3, delta: float = 0.2,
                  seed: int = 0, trials: int = 20) -> dict:
    """Exact-algebra residuals for L, S, W and A on a small instance (all should be ~1e-12 relative)."""
    rng = make_rng(seed)
    lam = np.sort(quantiles(0.0, N) + 0.01 * rng.standard_normal(N))
    J = bulk_set(N, delta)
    space = StateSpace.full(N, n)
    out = {}
    gens = {
        "L": moment_flow_generator(space, lam, KernelSpec("full")),
        "S": moment_flow_generator(space, lam, KernelSpec("short", ell=ell, J=J)),
        "W": moment_flow_generator(space, lam, KernelSpec("lattice", ell=ell, J=J)),
        "A": a_generator(space, lam, KernelSpec("a-short", ell=ell, eta=eta, J=J)),
    }
    for name, G in gens.items():
        D = np.diag(G.weight) @ G.Q.toarray()
        scale = max(1.0, float(np.max(np.abs(D))))
        out[f"{name}.symmetry"] = float(np.max(np.abs(D - D.T))) / scale
        out[f"{name}.constants"] = float(np.max(np.abs(G.Q @ np.ones(len(space))))) / scale
        worst_q = -math.inf
        worst_d = 0.0
        for _ in range(trials):
            h = rng.standard_normal(len(space))
            q = G.quadratic(h)
            worst_q = max(worst_q, q / scale)
            worst_d = max(worst_d, abs(-q - G.dirichlet(h)) / (scale * max(1.0, h @ h)))
        out[f"{name}.nonpositive"] = max(worst_q, 0.0)
        out[f"{name}.dirichlet"] = worst_d
        out[f"{name}.mass"] = abs(float(np.sum(G.weight * (G.Q @ rng.standard_normal(len(space)))))) / scale
    # B on configurations against L on ordered tuples, through phi
    K = kernel_matrix(KernelSpec("full"), lam)
    f = rng.standard_normal(len(space))
    Qf = gens["L"].Q @ f
    fmap = {space.configuration(k): f[k] for k in range(len(space))}
    B = apply_B(fmap, list(fmap), lam)
    g = lambda x: f[space.index[tuple(sorted(phi(x).particles()))]]
    scale = max(1.0, float(np.max(np.abs(Qf))))
    gap_B = max(abs(B[space.configuration(k)] - Qf[k]) for k in range(len(space))) / scale
    gap_L = 0.0
    for k in range(len(space)):
        x = doubled(space.states[k])
        for xo in {x, tuple(reversed(x))}:
            gap_L = max(gap_L, abs(apply_L_tuple(g, xo, K) - Qf[k]) / scale)
    out["B.phi-equivalence"] = gap_B
    out["L.tuple-literal"] = gap_L
    # particle number: every jump preserves n (states have n particles by construction); check S-kernel of 1(n even)
    out["S.kernel-indicator"] = float(np.max(np.abs(gens["S"].Q @ np.full(len(space), 1.0 if n % 2 == 0 else 0.0))))
    return out


def a_literal_gap(N: int = 6, n: int = 2, ell: int = 3, eta: float = 0.3, seed: int = 0) -> float:
    """A on multiset states against the ordered-tuple definition (tiny N only)."""
    rng = make_rng(seed)
    lam = np.sort(quantiles(0.0, N) + 0.01 * rng.standard_normal(N))
    space = StateSpace.full(N, n)
    spec = KernelSpec("a-short", ell=ell, eta=eta, J=(0, N))
    G = a_generator(space, lam, spec)
    f = rng.standard_normal(len(space))
    Af = G.Q @ f
    a = kernel_matrix(spec, lam)
    g = lambda x: f[space.index[tuple(sorted(phi(x).particles()))]]
    scale = max(1.0, float(np.max(np.abs(Af))))
    gap = 0.0
    for k in range(len(space)):
        x = doubled(space.states[k])
        for xo in sorted(set(itertools.permutations(x)))[:3]:
            gap = max(gap, abs(apply_A_tuple(g, xo, a, eta) - Af[k]) / scale)
    return gap
