"""Orchestration: one function per experiment kind, each returning ExperimentRecords.

Samples run serially in index order, so record order is canonical and a
config always reproduces the same statistics.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from rmtlab.cli.config import ExperimentConfig
from rmtlab.cli.records import ExperimentRecord, all_passed
from rmtlab.ensemble import GAUSSIAN, build_observable, distribution, sample_wigner
from rmtlab.rng import derive_seed, sample_rng
from rmtlab.spectral import decompose, kolmogorov_distance, rigidity_gauge


class RunError(RuntimeError):
    pass


@dataclass
class RunResult:
    config: ExperimentConfig
    records: list = field(default_factory=list)
    summary: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all_passed(self.records)


class _Recorder:
    def __init__(self, cfg: ExperimentConfig):
        self.hash = cfg.hash()
        self.run_id = f"{cfg.kind}-{self.hash[:8]}"
        self.records: list = []
        self.summary: list = []
        self._t = time.perf_counter()

    def add(self, statistic: str, value: float, error: float = math.nan, passed: Optional[bool] = None,
            index: int = 0, param: float = math.nan) -> None:
        now = time.perf_counter()
        self.records.append(ExperimentRecord(self.run_id, self.hash, statistic, float(value), float(error),
                                             None if passed is None else bool(passed), now - self._t, index=index,
                                             param=float(param)))
        self._t = now

    def note(self, line: str) -> None:
        self.summary.append(line)


def _observable(cfg: ExperimentConfig, N: Optional[int] = None):
    return build_observable(N or cfg.N, cfg.observable, seed=derive_seed(cfg.seed, 2 ** 32))


def _spectrum(cfg: ExperimentConfig, k: int, N: Optional[int] = None, dist=GAUSSIAN):
    try:
        return decompose(sample_wigner(N or cfg.N, cfg.beta, dist, derive_seed(cfg.seed, k)), validate=False)
    except np.linalg.LinAlgError as exc:
        raise RunError(f"eigensolver failed on sample {k}: {exc}") from exc


def _rate_record(rec: _Recorder, name: str, flags, required: float) -> float:
    flags = list(flags)
    rate = sum(flags) / len(flags)
    rec.add(name, rate, passed=rate >= required)
    rec.note(f"{name}: {sum(flags)}/{len(flags)} (required {required:.0%})")
    return rate


# ---------------------------------------------------------------------------------

def run_identities(cfg: ExperimentConfig, rec: _Recorder) -> None:
    from rmtlab.matchings import chain_reduction_check
    from rmtlab.overlap import identity_one_index, identity_qGq, identity_two_index

    p = cfg.params
    N, eta, tol = cfg.N, p["eta"], p["tol"]
    for k in range(cfg.samples):
        S = _spectrum(cfg, k)
        rng = sample_rng(cfg.seed, k, 1)
        A = build_observable(N, cfg.observable, seed=derive_seed(cfg.seed, k, 2))
        q = rng.standard_normal(N)
        q /= np.linalg.norm(q)
        i, j = (int(v) for v in rng.integers(0, N, size=2))
        checks = [("qGq", identity_qGq(S, q, i, eta)), ("one_index", identity_one_index(S, A, i, j, eta)),
                  ("two_index", identity_two_index(S, A, i, j, eta))]
        if p["cycle"]:
            sites = rng.choice(N, size=p["cycle_sites"], replace=False)
            checks.append(("cycle", chain_reduction_check(S, A, sites, eta)))
        for name, c in checks:
            rec.add(name, c.gap, passed=c.gap <= tol, index=k)
    worst = max(r.value for r in rec.records)
    rec.note(f"{len(rec.records)} identity checks, worst gap {worst:.3e} (tolerance {tol:g})")


def run_clt(cfg: ExperimentConfig, rec: _Recorder) -> None:
    from rmtlab.overlap import clt_samples, moment_report

    p = cfg.params
    x = clt_samples(cfg.N, cfg.beta, cfg.samples, cfg.seed, _observable(cfg), p["index"], distribution(p["dist"]),
                    p["pool"])
    for k, v in enumerate(x):
        rec.add("x", v, index=k)
    report = moment_report(x, p["n_max"])
    for row, tol in zip(report.rows, p["tol"]):
        ok = abs(row.moment - row.target) <= tol
        rec.add(f"m{row.n}", row.moment, row.stderr, ok, index=row.n, param=row.target)
        rec.note(f"m{row.n} = {row.moment:+.4f} +- {row.stderr:.4f} (target {row.target:g}, tol {tol:g})")


def run_eth(cfg: ExperimentConfig, rec: _Recorder) -> None:
    from rmtlab.overlap import eth_samples

    p = cfg.params
    bound = cfg.N ** (-0.5 + p["exponent"])
    vals = eth_samples(cfg.N, cfg.samples, cfg.seed, _observable(cfg), cfg.beta)
    for k, v in enumerate(vals):
        rec.add("max_overlap", v, passed=v <= bound, index=k, param=bound)
    _rate_record(rec, "eth_pass_rate", vals <= bound, p["rate"])
    if p["sweep"]:
        meds = []
        for N in sorted(p["sweep"]):
            v = eth_samples(N, p["sweep_samples"], cfg.seed, _observable(cfg, N), cfg.beta)
            meds.append(float(np.median(v)))
            rec.add("median_max_overlap", meds[-1], index=len(meds) - 1, param=N)
        dec = bool(np.all(np.diff(meds) < 0))
        rec.add("median_decreasing", float(dec), passed=dec)
        rec.note(f"median max overlap over N={sorted(p['sweep'])}: {', '.join(f'{m:.4f}' for m in meds)}")


def run_locallaw(cfg: ExperimentConfig, rec: _Recorder) -> None:
    from rmtlab.locallaw import run_chain, run_two_g

    p = cfg.params
    N = cfg.N
    A = _observable(cfg).centred
    eta = N ** p["eta_exponent"]
    reps = run_two_g(N, cfg.samples, eta, p["E"], cfg.seed, p["xi"], p["const"], cfg.beta, A)
    for k, r in enumerate(reps):
        rec.add("two_g_deviation", r.lhs, passed=r.passed, index=k, param=r.rhs)
    _rate_record(rec, "two_g_pass_rate", [r.passed for r in reps], p["rate"])
    ctl = run_two_g(N, p["control_samples"], eta, p["E"], cfg.seed, p["xi"], p["const"], cfg.beta, np.eye(N),
                    control=True)
    worst = min(r.ratio for r in ctl)
    rec.add("two_g_control_min_ratio", worst, passed=worst > 1.0)
    rec.note(f"two-G control (A = I) smallest deviation/bound ratio {worst:.2f}")

    Nc = p["chain_N"]
    Ac = _observable(cfg, Nc).centred
    eta_c = Nc ** p["chain_eta_exponent"]
    chain = run_chain(Nc, cfg.samples, eta_c, p["k"], p["E"], cfg.seed, p["chain_xi"], cfg.beta, Ac)
    for k, r in enumerate(chain):
        rec.add("chain_value", r.lhs, passed=r.passed, index=k, param=r.rhs)
    _rate_record(rec, "chain_pass_rate", [r.passed for r in chain], p["rate"])
    ctl = run_chain(Nc, p["control_samples"], eta_c, p["k"], p["E"], cfg.seed, p["chain_xi"], cfg.beta, Ac,
                    identity_slots=tuple(range(p["k"])))
    worst = min(r.ratio for r in ctl)
    rec.add("chain_control_min_ratio", worst, passed=worst > 1.0)
    rec.note(f"chain control (A = I) smallest value/bound ratio {worst:.2f}")

    for eta_s in sorted(p["etas"]):
        reps = run_two_g(N, cfg.samples, eta_s, p["E"], cfg.seed, p["xi"], p["const"], cfg.beta, A)
        dev = np.array([r.lhs for r in reps])
        rec.add("sweep_deviation", dev.mean(), dev.std(ddof=1) / math.sqrt(dev.size) if dev.size > 1 else math.nan,
                param=eta_s)
        rec.add("sweep_bound", reps[0].rhs, param=eta_s)


def run_rigidity(cfg: ExperimentConfig, rec: _Recorder) -> None:
    p = cfg.params

    def gauges(N):
        return np.array([rigidity_gauge(_spectrum(cfg, k, N).eigenvalues) for k in range(cfg.samples)])

    bound = cfg.N ** p["exponent"]
    g = gauges(cfg.N)
    for k, v in enumerate(g):
        rec.add("gauge", v, passed=v <= bound, index=k, param=bound)
    _rate_record(rec, "rigidity_pass_rate", g <= bound, p["rate"])
    rec.note(f"gauge median {np.median(g):.3f}, bound N^{p['exponent']} = {bound:.3f}")
    for i, N in enumerate(sorted(p["sweep"])):
        gN = g if N == cfg.N else gauges(N)
        rec.add("median_gauge", float(np.median(gN)), index=i, param=N)
        rec.add("gauge_bound", N ** p["exponent"], index=i, param=N)


def run_emf_relax(cfg: ExperimentConfig, rec: _Recorder) -> None:
    from rmtlab.emf.experiments import relaxation_experiment

    p = cfg.params
    tol = p["tol"] if p["tol"] is not None else (0.1 if cfg.n == 2 else 0.15)
    T = cfg.N ** p["T_exponent"]
    rep = relaxation_experiment(cfg.n, cfg.N, cfg.samples, T, cfg.seed, distribution(p["dist"]),
                                observable=_observable(cfg))
    for k, (c, m, se) in enumerate(zip(rep.configurations, rep.means, rep.stderr)):
        gap = abs(m - rep.target)
        rec.add("f_gap", gap, se, gap <= tol, index=k, param=m)
        rec.note(f"eta={dict(c.counts)}: f = {m:.4f} +- {se:.4f}, |f - {rep.target:g}| = {gap:.4f} (tol {tol:g})")


def run_emf_l2(cfg: ExperimentConfig, rec: _Recorder) -> None:
    from rmtlab.emf.experiments import l2_decay_experiment

    p = cfg.params
    rep = l2_decay_experiment(cfg.N, cfg.n, p["K"], p["ell"], p["T1"], p["eta"], p["delta"], cfg.seed, xi=p["xi"],
                              eps=p["eps"], records=p["records"])
    for k, (t, v) in enumerate(zip(rep.times, rep.norms)):
        rec.add("norm", v, index=k, param=t)
    rec.add("strictly_decreasing", float(rep.strictly_decreasing), passed=rep.strictly_decreasing)
    rec.add("endpoint_ratio", rep.endpoint_ratio, passed=rep.endpoint_ratio <= 1.0, param=rep.envelope)
    rec.note(f"||h||_2: {rep.norms[0]:.4g} -> {rep.norms[-1]:.4g}; envelope K^(n/2) E = {rep.envelope:.4g}; "
             f"{rep.params['states']} states")


def run_emf_algebra(cfg: ExperimentConfig, rec: _Recorder) -> None:
    from rmtlab.emf.experiments import algebra_suite, replacement_check
    from rmtlab.emf.flow import TrajectorySource, finite_speed_probe
    from rmtlab.emf.kernels import KernelSpec, bulk_set
    from rmtlab.emf.lattice import StateSpace

    p = cfg.params
    res = algebra_suite(cfg.N, cfg.n, p["ell"], p["eta"], p["delta"], cfg.seed)
    for k, (name, v) in enumerate(sorted(res.items())):
        rec.add(name, v, passed=v <= p["tol"], index=k)
    rec.note(f"{len(res)} algebra residuals, worst {max(res.values()):.2e} (tolerance {p['tol']:g})")
    rep = replacement_check(p["replacement_N"], cfg.n, p["replacement_eta"], p["replacement_ell"], p["delta"],
                            cfg.samples, cfg.seed)
    rec.add("replacement_both_hold", float(rep.both_hold), passed=rep.both_hold)
    rec.add("replacement_min_ratio", rep.min_ratio, param=rep.sharp_constant)
    rec.note(f"Dirichlet replacement: ratio in [{rep.min_ratio:.3f}, {rep.max_ratio:.3f}], "
             f"sharp constant {rep.sharp_constant:.3f}")
    Ns, ell = p["speed_N"], p["speed_ell"]
    space = StateSpace.full(Ns, 1)
    y = (Ns // 2,)
    spec = KernelSpec("short", ell=ell, J=bulk_set(Ns, p["delta"]))
    fs = finite_speed_probe(space, y, y, spec, 0.0, ell / Ns, TrajectorySource.frozen_quantiles(Ns),
                            far=p["speed_far"])
    rec.add("finite_speed_far_mass", fs.far_mass, passed=fs.far_mass <= p["speed_tol"], param=p["speed_far"])
    rec.note(f"finite speed: mass beyond distance {p['speed_far']} is {fs.far_mass:.2e}")


def run_dbm_gft(cfg: ExperimentConfig, rec: _Recorder) -> None:
    from rmtlab.dbm import gft_compare

    p = cfg.params
    N = cfg.N
    z = complex(p["E"], N ** (-1.0 - p["zeta"]))
    rep = gft_compare(N, cfg.samples, N ** p["t_exponent"], z, _observable(cfg).centred, p["theta"], cfg.seed,
                      distribution(p["dist"]), cfg.beta, p["omega"], zeta=p["zeta"])
    ok = rep.delta <= p["sigmas"] * rep.stderr + rep.threshold
    rec.add("gft_delta", rep.delta, rep.stderr, ok, param=rep.threshold)
    rec.note(f"Delta = {rep.delta:.4g} (SE {rep.stderr:.3g}); bound {p['sigmas']:g} SE + N^-{p['omega']:g} = "
             f"{p['sigmas'] * rep.stderr + rep.threshold:.4g}")


def run_spectra(cfg: ExperimentConfig, rec: _Recorder) -> None:
    from rmtlab.dbm import integrate_matrix_flow

    p = cfg.params
    t = p["t"]
    bound = cfg.N ** p["ks_exponent"]
    for k in range(cfg.samples):
        W = sample_wigner(cfg.N, cfg.beta, GAUSSIAN, derive_seed(cfg.seed, k))
        if t > 0:
            W = integrate_matrix_flow(W, t, 1, derive_seed(cfg.seed, k, 1)).sample()
        lam = decompose(W, validate=False).eigenvalues
        ks = kolmogorov_distance(lam, t)
        rec.add("kolmogorov", ks, passed=ks <= bound, index=k, param=bound)
        rec.add("spectral_radius", float(np.max(np.abs(lam))), index=k, param=2 * math.sqrt(1 + t))
    ks = [r.value for r in rec.records if r.statistic == "kolmogorov"]
    rec.note(f"Kolmogorov distance to the semicircle: max {max(ks):.4f} (bound N^{p['ks_exponent']} = {bound:.4f})")


RUNNERS: dict = {
    "identities": run_identities,
    "clt": run_clt,
    "eth": run_eth,
    "locallaw": run_locallaw,
    "rigidity": run_rigidity,
    "emf-relax": run_emf_relax,
    "emf-l2": run_emf_l2,
    "emf-algebra": run_emf_algebra,
    "dbm-gft": run_dbm_gft,
    "spectra": run_spectra,
}


def run(cfg: ExperimentConfig) -> RunResult:
    rec = _Recorder(cfg)
    RUNNERS[cfg.kind](cfg, rec)
    return RunResult(cfg, rec.records, rec.summary)
