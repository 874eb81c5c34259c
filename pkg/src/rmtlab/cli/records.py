"""Experiment records and their line-delimited text format.

A records block is a header of ``# key=value`` lines followed by one
whitespace-separated row per record:

    # rmtlab-records
    # kind=clt
    # config_hash=...
    # version=0.1.0
    # columns=index statistic value error passed param wall_time
    0 x 0.4312 nan - nan 0.0021

``passed`` is 1, 0 or ``-`` (no criterion). Blocks are appended, never rewritten.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, replace
from typing import Iterable, Optional, Sequence

import numpy as np

from rmtlab import __version__

COLUMNS = ("index", "statistic", "value", "error", "passed", "param", "wall_time")


class RecordError(IOError):
    pass


@dataclass(frozen=True)
class ExperimentRecord:
    run_id: str
    config_hash: str
    statistic: str
    value: float
    error: float = math.nan
    passed: Optional[bool] = None
    wall_time: float = 0.0
    version: str = __version__
    index: int = 0
    param: float = math.nan

    def row(self) -> str:
        flag = "-" if self.passed is None else str(int(bool(self.passed)))
        return " ".join([str(self.index), self.statistic, repr(float(self.value)), repr(float(self.error)), flag,
                         repr(float(self.param)), f"{self.wall_time:.6f}"])

    def without_time(self) -> "ExperimentRecord":
        return replace(self, wall_time=0.0)


def header(kind: str, config_hash: str, run_id: str, extra: Optional[dict] = None) -> list:
    lines = ["# rmtlab-records", f"# kind={kind}", f"# run_id={run_id}", f"# config_hash={config_hash}",
             f"# version={__version__}"]
    for k, v in sorted((extra or {}).items()):
        lines.append(f"# {k}={v}")
    lines.append("# columns=" + " ".join(COLUMNS))
    return lines


def format_records(records: Sequence[ExperimentRecord], kind: str, extra: Optional[dict] = None) -> str:
    if not records:
        raise RecordError("no records to write")
    r0 = records[0]
    lines = header(kind, r0.config_hash, r0.run_id, extra)
    lines.extend(r.row() for r in records)
    return "\n".join(lines) + "\n"


def write_records(path: str, records: Sequence[ExperimentRecord], kind: str, extra: Optional[dict] = None) -> None:
    """Append one block to ``path``."""
    text = format_records(records, kind, extra)
    with open(path, "a", encoding="utf-8") as fh:
        fh.write(text)


def read_records(path: str) -> list:
    """All blocks in a file, as a list of (header dict, records)."""
    blocks = []
    head: dict = {}
    rows: list = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.rstrip("\n")
            if not line:
                continue
            if line.startswith("#"):
                body = line[1:].strip()
                if body == "rmtlab-records":
                    if head or rows:
                        blocks.append((head, rows))
                    head, rows = {}, []
                elif "=" in body:
                    k, v = body.split("=", 1)
                    head[k] = v
                continue
            parts = line.split()
            if len(parts) != len(COLUMNS):
                raise RecordError(f"malformed record row: {line!r}")
            idx, stat, val, err, flag, param, wt = parts
            rows.append(ExperimentRecord(head.get("run_id", ""), head.get("config_hash", ""), stat, float(val),
                                         float(err), None if flag == "-" else flag == "1", float(wt),
                                         head.get("version", ""), int(idx), float(param)))
    if head or rows:
        blocks.append((head, rows))
    return blocks


def all_passed(records: Iterable[ExperimentRecord]) -> bool:
    return all(r.passed for r in records if r.passed is not None)


# Plot data ---------------------------------------------------------------------

def _select(records, statistic):
    return [r for r in records if r.statistic == statistic]


def _joined(records, value_stat, bound_stat) -> np.ndarray:
    """(param, value, bound) rows sorted by param."""
    bounds = {r.param: r.value for r in _select(records, bound_stat)}
    rows = sorted(_select(records, value_stat), key=lambda r: r.param)
    return np.array([[r.param, r.value, bounds.get(r.param, math.nan)] for r in rows]).reshape(-1, 3)


def histogram_table(values: np.ndarray, bins: int = 50, span: float = 4.0) -> np.ndarray:
    """(left edge, right edge, count) rows; values outside [-span, span] land in the end bins."""
    edges = np.linspace(-span, span, bins + 1)
    counts, _ = np.histogram(np.clip(values, -span, span), bins=edges)
    return np.column_stack([edges[:-1], edges[1:], counts])


def plot_table(records: Sequence[ExperimentRecord], kind: str, bins: int = 50, span: float = 4.0) -> tuple:
    """(column names, rows) for the plot-ready table of one experiment kind."""
    if not records:
        raise RecordError("no records")
    if kind == "clt":
        x = np.array([r.value for r in _select(records, "x")])
        return ("left", "right", "count"), histogram_table(x, bins, span)
    if kind == "rigidity":
        return ("N", "median_gauge", "bound"), _joined(records, "median_gauge", "gauge_bound")
    if kind == "locallaw":
        return ("eta", "mean_deviation", "bound"), _joined(records, "sweep_deviation", "sweep_bound")
    if kind == "eth":
        rows = sorted(_select(records, "median_max_overlap"), key=lambda r: r.param)
        return ("N", "median_max_overlap"), np.array([[r.param, r.value] for r in rows])
    if kind == "emf-l2":
        rows = _select(records, "norm")
        return ("t", "l2_norm"), np.array([[r.param, r.value] for r in rows])
    rows = [r for r in records if not math.isnan(r.value)]
    return ("index", "value", "error"), np.array([[r.index, r.value, r.error] for r in rows])


def emit_plotdata(records: Sequence[ExperimentRecord], kind: str, path: str, bins: int = 50,
                  span: float = 4.0) -> str:
    names, table = plot_table(records, kind, bins, span)
    d = os.path.dirname(os.path.abspath(path))
    os.makedirs(d, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("# " + " ".join(names) + "\n")
        for row in np.atleast_2d(table):
            fh.write(" ".join(repr(float(v)) for v in row) + "\n")
    return path
