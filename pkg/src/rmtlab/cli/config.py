"""Experiment configuration: YAML parsing, defaults, validation and hashing."""

from __future__ import annotations

import copy
import hashlib
import json
import math
import re
from dataclasses import dataclass, field
from typing import Any, Optional

import yaml

from rmtlab.emf.experiments import ParameterOrderError, check_scale_order, default_eta
from rmtlab.rng import check_seed

KINDS = ("identities", "clt", "eth", "locallaw", "rigidity", "emf-relax", "emf-l2", "emf-algebra", "dbm-gft",
         "spectra")
FORMATS = ("table", "records")
OBSERVABLES = ("diagonal-signs", "random-symmetric", "projection")

# Per-kind defaults. N, samples and n fill the top-level fields when left unset;
# everything else is a kind-specific parameter.
KIND_DEFAULTS: dict = {
    "identities": dict(N=8, samples=5, eta=0.1, tol=1e-10, cycle=False, cycle_sites=3),
    "clt": dict(N=512, samples=2000, n_max=4, index=None, pool=0, tol=[0.07, 0.10, 0.25, 0.45], dist="gaussian",
                bins=50, range=4.0),
    "eth": dict(N=1024, samples=20, exponent=0.2, rate=1.0, sweep=[256, 1024], sweep_samples=10),
    "locallaw": dict(N=1024, samples=50, eta_exponent=-0.8, E=0.0, xi=0.0, const=5.0, rate=0.96, chain_N=512,
                     chain_eta_exponent=-0.6, chain_xi=0.25, k=3, control_samples=5, etas=[]),
    "rigidity": dict(N=1024, samples=50, exponent=0.15, rate=0.96, sweep=[]),
    "emf-relax": dict(N=512, samples=2000, n=2, T_exponent=-0.8, tol=None, dist="rademacher"),
    "emf-l2": dict(N=200, n=2, samples=1, K=14, ell=5, T1=None, eta=None, delta=0.2, xi=0.05, eps=0.05, records=40),
    "emf-algebra": dict(N=8, n=2, samples=1000, ell=3, eta=0.3, delta=0.2, tol=1e-12, replacement_N=16,
                        replacement_ell=8, replacement_eta=0.05, speed_N=60, speed_ell=4, speed_far=20,
                        speed_tol=1e-6),
    "dbm-gft": dict(N=512, samples=2000, theta="x2", zeta=0.1, E=0.0, t_exponent=-0.8, omega=0.05, sigmas=3.0,
                    dist="rademacher"),
    "spectra": dict(N=512, samples=10, t=0.0, ks_exponent=-0.5),
}
TOP = ("kind", "N", "beta", "n", "samples", "seed", "observable", "out", "format", "params")
# fields that do not change the numbers produced
NON_SEMANTIC = ("out", "format")


class _Loader(yaml.SafeLoader):
    """SafeLoader that also reads 1e-6 style numbers (no dot) as floats, as YAML 1.2 does."""


_Loader.add_implicit_resolver(
    "tag:yaml.org,2002:float",
    re.compile(r"""^(?:[-+]?(?:[0-9][0-9_]*)\.[0-9_]*(?:[eE][-+]?[0-9]+)?
    |[-+]?(?:[0-9][0-9_]*)(?:[eE][-+]?[0-9]+)
    |\.[0-9_]+(?:[eE][-+]?[0-9]+)?
    |[-+]?\.(?:inf|Inf|INF)
    |\.(?:nan|NaN|NAN))$""", re.X),
    list("-+0123456789."))


def load_yaml(text: str) -> Any:
    return yaml.load(text, Loader=_Loader)


class ConfigError(ValueError):
    def __init__(self, message: str, field: Optional[str] = None):
        self.field = field
        super().__init__(f"{field}: {message}" if field else message)


@dataclass
class ExperimentConfig:
    kind: str = "identities"
    N: Optional[int] = None
    beta: int = 1
    n: Optional[int] = None
    samples: Optional[int] = None
    seed: int = 0
    observable: str = "random-symmetric"
    out: Optional[str] = None
    format: str = "table"
    params: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {k: copy.deepcopy(getattr(self, k)) for k in TOP}

    def to_yaml(self) -> str:
        return yaml.safe_dump(self.to_dict(), sort_keys=True)

    def hash(self) -> str:
        d = {k: v for k, v in self.to_dict().items() if k not in NON_SEMANTIC}
        blob = json.dumps(d, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]

    def __getitem__(self, key: str) -> Any:
        return self.params[key]


def _int(value, name, lo=None, hi=None):
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(f"expected an integer, got {value!r}", name)
    if lo is not None and value < lo:
        raise ConfigError(f"must be >= {lo}, got {value}", name)
    if hi is not None and value > hi:
        raise ConfigError(f"must be <= {hi}, got {value}", name)
    return value


def _number(value, name, positive=False):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"expected a number, got {value!r}", name)
    if not math.isfinite(value) or (positive and value <= 0):
        raise ConfigError(f"must be a {'positive ' if positive else ''}finite number, got {value}", name)
    return value


def parse_config(text: str) -> dict:
    try:
        raw = load_yaml(text) if text and text.strip() else {}
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        where = f" at line {mark.line + 1}, column {mark.column + 1}" if mark is not None else ""
        raise ConfigError(f"YAML parse error{where}: {getattr(exc, 'problem', exc)}") from exc
    if raw is None:
        raw = {}
    if not isinstance(raw, dict):
        raise ConfigError("top level must be a mapping")
    return raw


def build_config(raw: dict) -> ExperimentConfig:
    """Apply defaults to a raw mapping and validate every field."""
    raw = dict(raw)
    params = raw.pop("params", None) or {}
    if not isinstance(params, dict):
        raise ConfigError("must be a mapping", "params")
    kind = raw.get("kind", "identities")
    if kind not in KINDS:
        raise ConfigError(f"unknown experiment kind {kind!r}; choose from {', '.join(KINDS)}", "kind")
    defaults = KIND_DEFAULTS[kind]
    # kind-specific keys may also sit at top level
    for key in list(raw):
        if key not in TOP:
            if key not in defaults:
                raise ConfigError(f"unknown field for kind {kind!r}", key)
            params[key] = raw.pop(key)
    for key in params:
        if key not in defaults or key in ("N", "samples", "n"):
            raise ConfigError(f"unknown parameter for kind {kind!r}", f"params.{key}")
    merged = {k: copy.deepcopy(v) for k, v in defaults.items() if k not in ("N", "samples", "n")}
    merged.update(params)

    cfg = ExperimentConfig(
        kind=kind,
        N=raw.get("N") if raw.get("N") is not None else defaults.get("N"),
        beta=raw.get("beta", 1),
        n=raw.get("n") if raw.get("n") is not None else defaults.get("n", 2),
        samples=raw.get("samples") if raw.get("samples") is not None else defaults.get("samples", 1),
        seed=raw.get("seed", 0),
        observable=raw.get("observable", "random-symmetric"),
        out=raw.get("out"),
        format=raw.get("format", "table"),
        params=merged,
    )
    _validate(cfg)
    return cfg


def validate_config(text: str) -> ExperimentConfig:
    return build_config(parse_config(text))


def _validate(cfg: ExperimentConfig) -> None:
    _int(cfg.N, "N", lo=1)
    _int(cfg.n, "n", lo=1, hi=6)
    _int(cfg.samples, "samples", lo=1)
    if cfg.beta not in (1, 2):
        raise ConfigError(f"must be 1 or 2, got {cfg.beta!r}", "beta")
    try:
        cfg.seed = check_seed(cfg.seed)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc), "seed") from exc
    if cfg.observable not in OBSERVABLES:
        raise ConfigError(f"choose from {', '.join(OBSERVABLES)}", "observable")
    if cfg.format not in FORMATS:
        raise ConfigError(f"choose from {', '.join(FORMATS)}", "format")
    if cfg.out is not None and not isinstance(cfg.out, str):
        raise ConfigError("must be a path string", "out")
    p = cfg.params
    for key, value in p.items():
        default = KIND_DEFAULTS[cfg.kind][key]
        if isinstance(default, float) and value is not None:
            _number(value, f"params.{key}")
        elif isinstance(default, bool) and not isinstance(value, bool):
            raise ConfigError(f"expected true/false, got {value!r}", f"params.{key}")
        elif isinstance(default, int) and not isinstance(default, bool) and value is not None:
            _int(value, f"params.{key}")
    if cfg.N < 2:
        raise ConfigError("need N >= 2", "N")
    check = _KIND_CHECKS.get(cfg.kind)
    if check is not None:
        check(cfg)


def _check_emf_l2(cfg: ExperimentConfig) -> None:
    p = cfg.params
    N, K, ell = cfg.N, p["K"], p["ell"]
    if K > math.ceil(math.sqrt(N)):
        raise ConfigError(f"AvWindow invariant K <= ceil(sqrt(N)) = {math.ceil(math.sqrt(N))} fails for K={K}",
                          "params.K")
    T1 = math.sqrt(K) / N if p["T1"] is None else _number(p["T1"], "params.T1", positive=True)
    eta = default_eta(N, T1) if p["eta"] is None else _number(p["eta"], "params.eta", positive=True)
    if eta >= T1:
        raise ConfigError(f"η ≪ T1 violated: eta={eta:g} >= T1={T1:g}", "params.eta")
    try:
        check_scale_order(N, K, ell, T1, eta)
    except ParameterOrderError as exc:
        raise ConfigError(str(exc), "params") from exc


def _check_clt(cfg: ExperimentConfig) -> None:
    if len(cfg.params["tol"]) < cfg.params["n_max"]:
        raise ConfigError("need one tolerance per moment", "params.tol")


def _check_identities(cfg: ExperimentConfig) -> None:
    if cfg.params["cycle"] and not 2 <= cfg.params["cycle_sites"] <= min(cfg.N, 4):
        raise ConfigError("cycle reduction uses 2..4 distinct sites", "params.cycle_sites")


def _check_dbm(cfg: ExperimentConfig) -> None:
    from rmtlab.dbm import THETAS

    if cfg.params["theta"] not in THETAS:
        raise ConfigError(f"choose from {', '.join(sorted(THETAS))}", "params.theta")
    if not 0 < cfg.params["zeta"] <= 0.2:
        raise ConfigError("zeta must lie in (0, 0.2]", "params.zeta")


_KIND_CHECKS = {"emf-l2": _check_emf_l2, "clt": _check_clt, "identities": _check_identities, "dbm-gft": _check_dbm}
