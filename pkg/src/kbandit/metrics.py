"""Per-step regret/communication traces, their serialization, and trace-level checks."""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from itertools import accumulate
from pathlib import Path

import numpy as np

from .kernelcore import KernelSpec, as_rows, logdet_ratio

CSV_COLUMNS = ("t", "regret", "cum_regret", "cum_comm_scalars")


def fmt_float(x: float) -> str:
    return format(float(x), ".17g")


@dataclass
class SyncEvent:
    t: int
    scalars: int
    dictionary_size: int | None = None


@dataclass
class MetricsTrace:
    algorithm: str
    seed: int
    t: list[int] = field(default_factory=list)
    regret: list[float] = field(default_factory=list)
    cum_comm: list[int] = field(default_factory=list)
    syncs: list[SyncEvent] = field(default_factory=list)
    gamma_hat: float = 0.0
    chosen: np.ndarray | None = None

    @property
    def cum_regret(self) -> list[float]:
        return list(accumulate(self.regret))

    @property
    def n_syncs(self) -> int:
        return len(self.syncs)

    @property
    def total_regret(self) -> float:
        return self.cum_regret[-1] if self.regret else 0.0

    @property
    def total_comm(self) -> int:
        return self.cum_comm[-1] if self.cum_comm else 0

    def rows(self):
        for t, r, cr, cc in zip(self.t, self.regret, self.cum_regret, self.cum_comm):
            yield t, r, cr, cc

    def to_dict(self) -> dict:
        return {
            "algorithm": self.algorithm,
            "seed": self.seed,
            "gamma_hat": self.gamma_hat,
            "n_syncs": self.n_syncs,
            "steps": [dict(zip(CSV_COLUMNS, row)) for row in self.rows()],
            "syncs": [
                {"t": e.t, "scalars": e.scalars, "dictionary_size": e.dictionary_size}
                for e in self.syncs
            ],
        }


def _json_text(obj) -> str:
    # json.dumps formats floats via repr; the trace format asks for 17 significant digits.
    if isinstance(obj, dict):
        return "{" + ", ".join(f"{json.dumps(k)}: {_json_text(v)}" for k, v in obj.items()) + "}"
    if isinstance(obj, (list, tuple)):
        return "[" + ", ".join(_json_text(v) for v in obj) + "]"
    if isinstance(obj, float):
        return fmt_float(obj)
    return json.dumps(obj)


def emit(trace: MetricsTrace, fmt: str, path) -> Path:
    path = Path(path)
    if fmt == "csv":
        with path.open("w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(CSV_COLUMNS)
            for t, r, cr, cc in trace.rows():
                w.writerow([t, fmt_float(r), fmt_float(cr), cc])
    elif fmt == "json":
        path.write_text(_json_text(trace.to_dict()) + "\n", encoding="utf-8")
    else:
        raise ValueError(f"unknown format {fmt!r}")
    return path


def read_csv_trace(path) -> dict[str, list]:
    with Path(path).open(newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != CSV_COLUMNS:
            raise ValueError(f"unexpected columns {reader.fieldnames}")
        out: dict[str, list] = {c: [] for c in CSV_COLUMNS}
        for row in reader:
            out["t"].append(int(row["t"]))
            out["regret"].append(float(row["regret"]))
            out["cum_regret"].append(float(row["cum_regret"]))
            out["cum_comm_scalars"].append(int(row["cum_comm_scalars"]))
    return out


def epoch_logdet_ratios(kernel: KernelSpec, lam: float, chosen, sync_times) -> list[float]:
    """log det ratios between consecutive synchronization points, plus the final partial epoch.

    Their sum telescopes to log det(I + K/lam) over the whole trace.
    """
    X = as_rows(chosen)
    bounds = [0] + [t for t in sync_times if 0 < t < X.shape[0]] + [X.shape[0]]
    return [logdet_ratio(kernel, lam, X[:a], X[a:b]) for a, b in zip(bounds, bounds[1:]) if b > a]
