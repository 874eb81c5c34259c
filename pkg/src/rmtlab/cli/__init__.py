"""Command-line experiment runner.

    rmtlab <kind> [--config PATH] [--dim N] [--n n] [--beta 1|2] [--samples M]
                  [--seed U64] [--out PATH] [--format table|records]
                  [--set key=value ...] [--plot PATH]

Exit status: 0 when every pass flag is true, 1 when any is false, 2 on a
configuration error.
"""

from __future__ import annotations

import argparse
import sys
from typing import Optional, Sequence

import yaml

from rmtlab.cli.config import (KINDS, ConfigError, ExperimentConfig, build_config, load_yaml, parse_config,
                               validate_config)
from rmtlab.cli.records import ExperimentRecord, emit_plotdata, format_records, read_records, write_records
from rmtlab.cli.runner import RunError, RunResult, run

__all__ = ["ConfigError", "ExperimentConfig", "ExperimentRecord", "RunError", "RunResult", "build_config",
           "emit_plotdata", "main", "read_records", "run", "validate_config"]

EXIT_PASS, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="rmtlab", description="Random-matrix experiment runner.")
    ap.add_argument("kind", choices=KINDS, help="experiment kind")
    ap.add_argument("--config", metavar="PATH", help="YAML config file")
    ap.add_argument("--dim", type=int, metavar="INT", help="matrix dimension N")
    ap.add_argument("--n", type=int, metavar="INT", help="particle number / moment order n")
    ap.add_argument("--beta", type=int, choices=(1, 2))
    ap.add_argument("--samples", type=int, metavar="INT", help="Monte Carlo sample count M")
    ap.add_argument("--seed", type=int, metavar="U64", help="master seed")
    ap.add_argument("--out", metavar="PATH", help="append records to this file")
    ap.add_argument("--format", choices=("table", "records"), help="stdout format")
    ap.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                    help="override a kind-specific parameter (value parsed as YAML)")
    ap.add_argument("--plot", metavar="PATH", help="write plot-ready table here")
    return ap


def config_from_args(args: argparse.Namespace) -> ExperimentConfig:
    raw: dict = {}
    if args.config:
        try:
            with open(args.config, encoding="utf-8") as fh:
                raw = parse_config(fh.read())
        except OSError as exc:
            raise ConfigError(f"cannot read config: {exc}", "--config") from exc
    if raw.get("kind", args.kind) != args.kind:
        raise ConfigError(f"config file is for {raw['kind']!r}, command line asks for {args.kind!r}", "kind")
    raw["kind"] = args.kind
    for flag, key in (("dim", "N"), ("n", "n"), ("beta", "beta"), ("samples", "samples"), ("seed", "seed"),
                      ("out", "out"), ("format", "format")):
        value = getattr(args, flag)
        if value is not None:
            raw[key] = value
    params = dict(raw.pop("params", None) or {})
    for item in args.set:
        if "=" not in item:
            raise ConfigError(f"expected KEY=VALUE, got {item!r}", "--set")
        key, value = item.split("=", 1)
        try:
            params[key.strip()] = load_yaml(value)
        except yaml.YAMLError as exc:
            raise ConfigError(f"cannot parse value {value!r}", key.strip()) from exc
    raw["params"] = params
    return build_config(raw)


def render_table(result: RunResult) -> str:
    cfg = result.config
    lines = [f"rmtlab {cfg.kind}: N={cfg.N} beta={cfg.beta} n={cfg.n} samples={cfg.samples} seed={cfg.seed} "
             f"config={cfg.hash()}"]
    lines.extend("  " + s for s in result.summary)
    flagged = [r for r in result.records if r.passed is not None]
    failed = [r for r in flagged if not r.passed]
    lines.append(f"{len(flagged) - len(failed)}/{len(flagged)} checks passed -> {'PASS' if not failed else 'FAIL'}")
    for r in failed[:10]:
        lines.append(f"  failed: {r.statistic}[{r.index}] = {r.value:.6g}")
    return "\n".join(lines)


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = config_from_args(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        result = run(cfg)
    except RunError as exc:
        print(f"run aborted: {exc}", file=sys.stderr)
        return EXIT_FAIL
    if cfg.out:
        write_records(cfg.out, result.records, cfg.kind)
    if args.plot:
        emit_plotdata(result.records, cfg.kind, args.plot, **_plot_options(cfg))
    if cfg.format == "records":
        sys.stdout.write(format_records(result.records, cfg.kind))
    else:
        print(render_table(result))
    return EXIT_PASS if result.passed else EXIT_FAIL


def _plot_options(cfg: ExperimentConfig) -> dict:
    if cfg.kind == "clt":
        return dict(bins=cfg.params["bins"], span=cfg.params["range"])
    return {}
