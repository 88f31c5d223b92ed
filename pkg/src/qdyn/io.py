"""Plain-text output formats: time series CSV, density snapshots, phase-space matrices."""
from __future__ import annotations

import csv
from pathlib import Path
from typing import Iterable, List

import numpy as np

from .core import PhaseSpaceField
from .observables import ObservableRecord

__all__ = [
    "TIMESERIES_HEADER",
    "DENSITY_HEADER",
    "format_float",
    "time_stamp",
    "write_timeseries",
    "read_timeseries",
    "write_density",
    "read_density",
    "write_wigner_matrix",
    "read_wigner_matrix",
    "write_metadata",
    "read_metadata",
]

TIMESERIES_HEADER = ("t", "norm", "N_minus", "N_plus", "q_mean_minus", "q_mean_plus", "energy")
DENSITY_HEADER = ("q", "density")


def format_float(x) -> str:
    """Shortest round-tripping decimal form; ``None`` becomes an empty field."""
    if x is None:
        return ""
    return repr(float(x))


def _parse_float(s: str):
    return None if s == "" else float(s)


def time_stamp(t: float) -> str:
    """File-name stamp, e.g. ``0008.000`` for t = 8."""
    return f"{t:08.3f}"


def _write_rows(path: Path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def _read_rows(path: Path, header):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or tuple(rows[0]) != tuple(header):
        raise ValueError(f"{path}: unexpected header {rows[0] if rows else None}")
    return rows[1:]


def write_timeseries(path, records: Iterable[ObservableRecord]) -> None:
    rows = [
        [format_float(r.t), format_float(r.norm), format_float(r.N_minus), format_float(r.N_plus),
         format_float(r.q_mean_minus), format_float(r.q_mean_plus), format_float(r.energy)]
        for r in records
    ]
    _write_rows(Path(path), TIMESERIES_HEADER, rows)


def read_timeseries(path) -> List[ObservableRecord]:
    return [ObservableRecord(*[_parse_float(v) for v in row]) for row in _read_rows(Path(path), TIMESERIES_HEADER)]


def write_density(path, q, density) -> None:
    _write_rows(Path(path), DENSITY_HEADER, [[format_float(a), format_float(b)] for a, b in zip(q, density)])


def read_density(path):
    rows = _read_rows(Path(path), DENSITY_HEADER)
    arr = np.array([[float(a), float(b)] for a, b in rows]).reshape(-1, 2)
    return arr[:, 0], arr[:, 1]


def write_wigner_matrix(path, fld: PhaseSpaceField) -> None:
    """First line ``rows cols qmin dq pmin dp``, then one space-separated row per q node."""
    g = fld.grid
    with open(path, "w", newline="") as fh:
        head = [str(g.qgrid.n), str(g.pgrid.n)] + [format_float(v) for v in (g.qgrid.q_min, g.qgrid.dq, g.pgrid.q_min, g.pgrid.dq)]
        fh.write(" ".join(head) + "\n")
        for row in fld.w:
            fh.write(" ".join(format_float(v) for v in row) + "\n")


def read_wigner_matrix(path):
    """Returns ``(w, (qmin, dq, pmin, dp))``."""
    with open(path) as fh:
        head = fh.readline().split()
        if len(head) != 6:
            raise ValueError(f"{path}: malformed matrix header")
        rows, cols = int(head[0]), int(head[1])
        w = np.loadtxt(fh, ndmin=2)
    if w.shape != (rows, cols):
        raise ValueError(f"{path}: expected {rows}x{cols} values, found {w.shape}")
    return w, tuple(float(v) for v in head[2:])


def write_metadata(path, items: dict) -> None:
    with open(path, "w", newline="") as fh:
        for k, v in items.items():
            fh.write(f"{k} = {v}\n")


def read_metadata(path) -> dict:
    out = {}
    with open(path) as fh:
        for line in fh:
            if "=" in line:
                k, v = line.split("=", 1)
                out[k.strip()] = v.strip()
    return out
