"""Time integration of the moment flow and the propagation probes built on it.

The master equation dh/dt = Gen(t) h is advanced with classical RK4. The
step obeys h <= safety / (max exit rate); for safety <= 1 the RK4 update is
a polynomial in I + h Q with nonnegative coefficients, so it stays a
(sub)stochastic, reversible map. L-infinity and L2(pi) contraction
therefore hold step by step. Each step is also compared against two half
steps, and halved when the difference exceeds the tolerance.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
import scipy.linalg

from rmtlab.emf.generators import FlowState, Generator, moment_flow_generator, one_particle_transitions
from rmtlab.emf.kernels import KernelSpec, pattern
from rmtlab.emf.lattice import AvWindow, StateSpace, av_vector, distance_vector
from rmtlab.spectral import quantiles


class StiffnessError(RuntimeError):
    pass


@dataclass(frozen=True, eq=False)
class TrajectorySource:
    """Piecewise-constant eigenvalue trajectory: snapshot k is used on [times[k], times[k+1])."""

    times: np.ndarray
    snapshots: np.ndarray
    mode: str = "frozen-quantiles"

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        s = np.atleast_2d(np.asarray(self.snapshots, dtype=float))
        if t.ndim != 1 or t.shape[0] != s.shape[0]:
            raise ValueError("one snapshot per grid time is required")
        if np.any(np.diff(t) <= 0):
            raise ValueError("time grid must be strictly increasing")
        if np.any(np.diff(s, axis=1) < 0):
            raise ValueError("every eigenvalue snapshot must be sorted")
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "snapshots", s)

    @classmethod
    def frozen_quantiles(cls, N: int, t: float = 0.0) -> "TrajectorySource":
        return cls(np.array([0.0]), quantiles(t, N)[None, :], "frozen-quantiles")

    @classmethod
    def quantile_path(cls, N: int, times: Sequence[float]) -> "TrajectorySource":
        times = np.asarray(times, dtype=float)
        return cls(times, np.array([quantiles(t, N) for t in times]), "quantile-path")

    @classmethod
    def from_path(cls, path) -> "TrajectorySource":
        return cls(path.times, path.values, "simulated-dbm")

    @property
    def N(self) -> int:
        return self.snapshots.shape[1]

    def index(self, t: float) -> int:
        return max(int(np.searchsorted(self.times, t, side="right")) - 1, 0)

    def at(self, t: float) -> np.ndarray:
        return self.snapshots[self.index(t)]


@dataclass(eq=False)
class FlowPath:
    times: list = field(default_factory=list)
    states: list = field(default_factory=list)
    steps: int = 0
    rejected: int = 0
    killed: float = 0.0

    @property
    def final(self) -> FlowState:
        return self.states[-1]

    def norms(self, p: float = 2) -> np.ndarray:
        return np.array([s.norm(p) for s in self.states])


def rk4_step(Q, y: np.ndarray, h: float) -> np.ndarray:
    k1 = Q @ y
    k2 = Q @ (y + 0.5 * h * k1)
    k3 = Q @ (y + 0.5 * h * k2)
    k4 = Q @ (y + h * k3)
    return y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def _advance(gen: Generator, y: np.ndarray, span: float, safety: float, rtol: float, atol: float,
             path: FlowPath) -> np.ndarray:
    rate = float(np.max(gen.exit_rates, initial=0.0))
    if rate == 0.0:
        return y
    h_max = safety / rate
    h = min(h_max, span)
    h_min = span * 1e-12
    done = 0.0
    while done < span * (1 - 1e-14):
        h = min(h, span - done)
        full = rk4_step(gen.Q, y, h)
        half = rk4_step(gen.Q, rk4_step(gen.Q, y, 0.5 * h), 0.5 * h)
        err = float(np.max(np.abs(half - full), initial=0.0)) / 15.0
        if err > atol + rtol * float(np.max(np.abs(y), initial=0.0)):
            path.rejected += 1
            h *= 0.5
            if h < h_min:
                raise StiffnessError(f"step size underflow: h={h:.3e} with max exit rate {rate:.3e}")
            continue
        # killed mass leaving a truncated space during this step
        path.killed += float(np.sum(gen.weight * gen.kill * np.abs(y))) * h
        y = half
        done += h
        path.steps += 1
        h = min(h * 2.0, h_max)
    return y


def integrate(h0: FlowState, source: TrajectorySource, schedule: Sequence, t_end: float,
              record: Optional[Sequence[float]] = None, safety: float = 0.2, rtol: float = 1e-9,
              atol: float = 1e-13) -> FlowPath:
    """Solve dh/dt = Gen(t) h from h0.t to t_end.

    ``schedule`` is a list of (start time, KernelSpec) pairs; the generator
    switches at each start time (e.g. short range S, then lattice W). The
    eigenvalues are read from ``source`` and are piecewise constant.
    """
    if not 0 < safety <= 1:
        raise ValueError("safety factor must lie in (0, 1]")
    t0 = h0.t
    if t_end < t0:
        raise ValueError("t_end precedes the initial time")
    schedule = sorted(((float(s), spec) for s, spec in schedule), key=lambda x: x[0])
    if not schedule or schedule[0][0] > t0:
        raise ValueError("schedule must cover the initial time")
    space = h0.space
    cuts = {t0, t_end}
    cuts.update(s for s, _ in schedule if t0 < s < t_end)
    cuts.update(t for t in source.times if t0 < t < t_end)
    rec = set()
    if record is not None:
        rec = {float(t) for t in record if t0 <= t <= t_end}
        cuts.update(rec)
    cuts = sorted(cuts)
    trans_cache = {}
    path = FlowPath(times=[t0], states=[h0])
    y = np.array(h0.values, dtype=float)
    for a, b in zip(cuts[:-1], cuts[1:]):
        spec = [sp for s, sp in schedule if s <= a][-1]
        key = (spec.mode, spec.ell, spec.J)
        if key not in trans_cache:
            trans_cache[key] = one_particle_transitions(space, pattern(spec, space.N))
        gen = moment_flow_generator(space, source.at(a), spec, trans_cache[key])
        y = _advance(gen, y, b - a, safety, rtol, atol, path)
        if record is None or b in rec or b == t_end:
            path.times.append(b)
            path.states.append(h0.replace(y.copy(), b))
    return path


def delta_state(space: StateSpace, y: Sequence[int]) -> FlowState:
    """delta_y(u) = pi(y)^{-1} 1(u = y) on the multiset class of y."""
    k = space.index[tuple(sorted(y))]
    v = np.zeros(len(space))
    v[k] = 1.0 / space.pi[k]
    return FlowState(space, v)


@dataclass(frozen=True)
class FiniteSpeedReport:
    entry: float
    far_mass: float
    far_max: float
    distance: int


def finite_speed_probe(space: StateSpace, x: Sequence[int], y: Sequence[int], spec: KernelSpec, s1: float,
                       s2: float, source: TrajectorySource, far: Optional[int] = None) -> FiniteSpeedReport:
    """U_S(s1, s2)_{xy} = <delta_x, U_S delta_y>, plus the mass that reached d(., y) > far.

    The mass is sum_u w(u) |U_S delta_y (u)| / mult(y) over states farther than ``far``,
    normalised so that the total mass is 1.
    """
    if spec.mode != "short":
        raise ValueError("finite speed is a statement about the short-range generator")
    if s2 - s1 > spec.ell / space.N * (1 + 1e-12):
        raise ValueError(f"need s2 - s1 <= ell/N = {spec.ell / space.N:g}")
    J = spec.bulk(space.N)
    h0 = FlowState(space, delta_state(space, y).values, s1)
    path = integrate(h0, source, [(s1, spec)], s2)
    u = path.final.values
    k = space.index[tuple(sorted(y))]
    d = distance_vector(space, y, J)
    far = spec.ell * 5 if far is None else far
    mask = d > far
    mass = float(np.sum(space.weight[mask] * np.abs(u[mask])) / space.mult[k])
    far_max = float(np.max(np.abs(u[mask]), initial=0.0))
    return FiniteSpeedReport(float(path.final.at(x)), mass, far_max, int(d[space.index[tuple(sorted(x))]]))


# Small-instance semigroup probes ---------------------------------------------

def semigroup(space: StateSpace, lam: np.ndarray, spec: KernelSpec, t: float) -> np.ndarray:
    """Dense exp(t Gen) for a frozen eigenvalue snapshot (small spaces only)."""
    Q = moment_flow_generator(space, lam, spec).Q.toarray()
    return scipy.linalg.expm(t * Q)


def commutator_norm(space: StateSpace, lam: np.ndarray, spec: KernelSpec, window: AvWindow, t: float) -> float:
    """||[U_S(0, t), Av]||_{inf, inf} = max_x sum_y |U_xy (Av(y) - Av(x))|."""
    U = semigroup(space, lam, spec, t)
    a = av_vector(space, window)
    C = U * (a[None, :] - a[:, None])
    return float(np.max(np.sum(np.abs(C), axis=1)))


def short_long_gap(space: StateSpace, lam: np.ndarray, spec: KernelSpec, f: np.ndarray, t: float) -> float:
    """max over x supported on J of |(U - U_S)(0, t) f (x)|."""
    U = semigroup(space, lam, spec.with_mode("full"), t)
    US = semigroup(space, lam, spec.with_mode("short"), t)
    lo, hi = spec.bulk(space.N)
    inside = np.all((space.particles >= lo) & (space.particles < hi), axis=1)
    return float(np.max(np.abs(((U - US) @ f)[inside])))


def ultracontractivity_probe(space: StateSpace, lam: np.ndarray, spec: KernelSpec,
                             times: Sequence[float]) -> np.ndarray:
    """||U_W(t)||_{L2(pi) -> L-inf} = max_x sqrt(sum_y U_xy^2 / w_y) for each t."""
    Q = moment_flow_generator(space, lam, spec.with_mode("lattice")).Q.toarray()
    out = []
    for t in times:
        U = scipy.linalg.expm(t * Q)
        out.append(float(np.max(np.sqrt(np.sum(U * U / space.weight[None, :], axis=1)))))
    return np.array(out)
