"""Scenario execution and run-to-run comparison."""
from __future__ import annotations

import logging
import math
import time
import warnings
from pathlib import Path

import numpy as np

from . import __version__
from .config import RunConfig, serialize_config
from .core import GaussianPacketSpec, Grid1D, PhaseSpaceField, PotentialSpec, WaveField
from .errors import ConfigError, NumericalInstabilityError, SnapshotMismatchError
from .estimators import (
    ChebyshevPropagator,
    CrankNicolsonPropagator,
    DiagonalizationPropagator,
    LinearizedPropagator,
    TomographicPropagator,
    WignerFirstOrder,
    WignerSecondOrder,
)
from .io import (
    _write_rows,
    format_float,
    read_density,
    read_timeseries,
    time_stamp,
    write_density,
    write_metadata,
    write_timeseries,
    write_wigner_matrix,
)
from .linprop import courant_dt
from .observables import observables_from_density, wavefield_energy, wigner_energy
from .validation import resolve_workers

__all__ = ["run_scenario", "compare_runs", "output_times", "build_estimator", "COMPARE_HEADER"]

logger = logging.getLogger(__name__)

COMPARE_HEADER = ("quantity", "t", "L1", "L2", "Linf", "max_abs_dev")


def _multiples(step: float, t_final: float, name: str):
    k = t_final / step
    K = int(round(k))
    if abs(K - k) > 1e-9 * max(1.0, k) or K < 1:
        raise ConfigError(f"t_final = {t_final:g} is not a positive multiple of {name} = {step:g}")
    return [step * i for i in range(1, K + 1)]


def output_times(cfg: RunConfig):
    """Series times ``series_every * k`` and snapshot times ``snapshot_every * k`` up to ``t_final``."""
    series = _multiples(cfg.series_every, cfg.t_final, "series_every")
    n_snap = math.floor(cfg.t_final / cfg.snapshot_every + 1e-9)
    snaps = [cfg.snapshot_every * i for i in range(1, n_snap + 1)]
    return series, snaps


def _linprop_dt(cfg: RunConfig, explicit: bool, spec: PotentialSpec) -> float:
    if explicit:
        return cfg.dt
    grid = Grid1D.centered(cfg.grid_n, cfg.dq)
    cap = min(cfg.dt, courant_dt(spec, grid))
    # largest step below the cap that divides the series interval
    return cfg.series_every / math.ceil(cfg.series_every / cap - 1e-12)


def build_estimator(cfg: RunConfig, spec: PotentialSpec, dt: float):
    m = cfg.method
    if m == "chebyshev":
        return ChebyshevPropagator(spec, n=cfg.grid_n, dq=cfg.dq, dt=dt)
    if m == "cranknicolson":
        return CrankNicolsonPropagator(spec, n=cfg.grid_n, dq=cfg.dq, dt=dt)
    if m == "diag":
        return DiagonalizationPropagator(spec, n=cfg.grid_n, dq=cfg.dq)
    if m == "linprop":
        return LinearizedPropagator(spec, n=cfg.grid_n, dq=cfg.dq, dt=dt)
    if m == "wigner1":
        return WignerFirstOrder(spec, nq=cfg.grid_n, dq=cfg.dq, np_=cfg.grid_n, dp=cfg.dp, n_particles=cfg.n_particles,
                                dt=dt, seed=cfg.seed, workers=resolve_workers(cfg.workers))
    if m == "wigner2":
        return WignerSecondOrder(spec, nq=cfg.grid_n, dq=cfg.dq, np_=cfg.grid_n, dp=cfg.dp, dt=dt)
    if m in ("tomogram-char", "tomogram-sde"):
        mode = "characteristics" if m == "tomogram-char" else "sde"
        return TomographicPropagator(spec, mode=mode, n_traj=cfg.n_particles, dt=dt, seed=cfg.seed, x_n=cfg.grid_n,
                                     x_dx=cfg.dq)
    raise ConfigError(f"unknown method '{m}'")


def _reduce(est, t, state):
    """Observable record, coordinate axis and density for one predicted state."""
    if isinstance(state, WaveField):
        d = state.density()
        return observables_from_density(t, d, state.grid, wavefield_energy(state, est.potential_)), state.grid.points, d
    if isinstance(state, PhaseSpaceField):
        d = state.q_marginal()
        q = state.grid.qgrid
        return observables_from_density(t, d, q, wigner_energy(state, est.potential_)), q.points, d
    x = est.x_grid_.points
    return observables_from_density(t, state, x, None), x, state


def run_scenario(cfg: RunConfig, out_dir=None) -> dict:
    """Run one scenario and write its outputs; returns a summary dict.

    Files: ``timeseries.csv``, ``density_t<stamp>.csv`` per snapshot,
    ``wigner_t<stamp>.mat`` for phase-space methods, ``run.txt`` metadata
    and, when ``reference`` is set, ``compare.csv`` against a reference run
    stored in ``reference/``.
    """
    explicit_dt = cfg.dt is not None
    cfg = cfg.resolved()
    out = Path(out_dir if out_dir is not None else cfg.out_dir)
    spec = getattr(PotentialSpec, cfg.potential)()
    packet = GaussianPacketSpec()
    dt = _linprop_dt(cfg, explicit_dt, spec) if cfg.method == "linprop" else cfg.dt
    series, snaps = output_times(cfg)
    all_times = sorted(set(np.round(series + snaps, 12)))

    est = build_estimator(cfg, spec, dt)
    step = 0.0 if cfg.method == "diag" else dt
    if step and any(abs(t / step - round(t / step)) > 1e-9 * max(1.0, t / step) for t in all_times):
        raise ConfigError(f"output times must be multiples of dt = {dt:g}")
    t0 = time.perf_counter()
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        est.fit(packet)
        states = est.predict(all_times)
    wall = time.perf_counter() - t0
    if caught:
        logger.warning("%d warnings during propagation; last: %s", len(caught), caught[-1].message)

    out.mkdir(parents=True, exist_ok=True)
    records, snap_set = [], set(np.round(snaps, 12))
    series_set = set(np.round(series, 12))
    for t, s in zip(all_times, states):
        rec, q, d = _reduce(est, t, s)
        if not all(np.isfinite([rec.norm, rec.N_minus, rec.N_plus])):
            raise NumericalInstabilityError(f"non-finite observables at t = {t:g}")
        if t in series_set:
            records.append(rec)
        if t in snap_set:
            write_density(out / f"density_t{time_stamp(t)}.csv", q, d)
            if isinstance(s, PhaseSpaceField):
                write_wigner_matrix(out / f"wigner_t{time_stamp(t)}.mat", s)
    write_timeseries(out / "timeseries.csv", records)

    meta = {
        "version": __version__,
        "method": cfg.method,
        "potential": cfg.potential,
        "seed": cfg.seed,
        "dt_used": repr(float(dt)),
        "n_steps": int(round(cfg.t_final / dt)) if cfg.method != "diag" else 0,
        "warnings": len(caught),
    }
    for line in serialize_config(cfg).splitlines():
        k, v = line.split(" = ", 1)
        meta.setdefault(k, v)
    meta["wall_time_s"] = f"{wall:.3f}"
    write_metadata(out / "run.txt", meta)

    summary = {"out_dir": str(out), "wall_time": wall, "records": records, "dt": dt}
    if cfg.reference:
        ref_cfg = RunConfig(
            potential=cfg.potential, method=cfg.reference, preset=cfg.preset, t_final=cfg.t_final,
            series_every=cfg.series_every, snapshot_every=cfg.snapshot_every, seed=cfg.seed, workers=cfg.workers,
        )
        run_scenario(ref_cfg, out / "reference")
        summary["compare"] = compare_runs(out, out / "reference", out / "compare.csv")
    return summary


def _series_close(a, b):
    return len(a) == len(b) and all(abs(x.t - y.t) <= 1e-9 * max(1.0, abs(x.t)) for x, y in zip(a, b))


def compare_runs(dir_a, dir_b, out_path=None) -> list:
    """Per-snapshot density norms and per-series maximum deviations between two run directories.

    Densities of ``dir_b`` are linearly interpolated onto the coordinate
    axis of ``dir_a`` (zero outside its range). Time stamps must match.
    """
    a, b = Path(dir_a), Path(dir_b)
    for d in (a, b):
        if not (d / "timeseries.csv").is_file():
            raise FileNotFoundError(f"{d}: no timeseries.csv")
    sa, sb = read_timeseries(a / "timeseries.csv"), read_timeseries(b / "timeseries.csv")
    if not _series_close(sa, sb):
        raise SnapshotMismatchError(f"time series of {a} and {b} have different time stamps")
    snaps_a = sorted(p.name for p in a.glob("density_t*.csv"))
    snaps_b = sorted(p.name for p in b.glob("density_t*.csv"))
    if snaps_a != snaps_b:
        raise SnapshotMismatchError(f"density snapshots differ: {snaps_a} vs {snaps_b}")

    rows = []
    for name in snaps_a:
        qa, da = read_density(a / name)
        qb, db = read_density(b / name)
        if qa.shape != qb.shape or not np.allclose(qa, qb, rtol=0, atol=1e-12):
            db = np.interp(qa, qb, db, left=0.0, right=0.0)
        diff = np.abs(da - db)
        h = float(np.mean(np.diff(qa)))
        t = float(name[len("density_t") : -len(".csv")])
        rows.append(("density", t, float(diff.sum() * h), float(math.sqrt((diff**2).sum() * h)), float(diff.max()), None))
    for col in ("norm", "N_minus", "N_plus", "q_mean_minus", "q_mean_plus", "energy"):
        devs = [abs(getattr(x, col) - getattr(y, col)) for x, y in zip(sa, sb)
                if getattr(x, col) is not None and getattr(y, col) is not None]
        rows.append((col, None, None, None, None, max(devs) if devs else None))

    if out_path is not None:
        _write_rows(Path(out_path), COMPARE_HEADER,
                    [[r[0]] + [format_float(v) for v in r[1:]] for r in rows])
    return [dict(zip(COMPARE_HEADER, r)) for r in rows]
