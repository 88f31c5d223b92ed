"""Command-line entry point: ``qdyn run``, ``qdyn compare`` and ``qdyn oracle``.

Exit codes: 0 success, 1 configuration error, 2 numerical instability, 3 I/O error.
"""
from __future__ import annotations

import argparse
import logging
import math
import sys

from .config import METHODS, POTENTIALS, PRESETS, RunConfig, apply_overrides, parse_config
from .core import GaussianPacketSpec, Grid1D, PotentialSpec, init_wavefunction
from .errors import NumericalInstabilityError, QdynError
from .io import format_float, write_density
from .observables import ellipse_transmission_oracle, observables_from_density
from .reference import build_diag_oracle, chebyshev_order, diag_propagate
from .runner import compare_runs, run_scenario

__all__ = ["main", "build_parser", "EXIT_CONFIG", "EXIT_NUMERIC", "EXIT_IO"]

EXIT_CONFIG, EXIT_NUMERIC, EXIT_IO = 1, 2, 3

logger = logging.getLogger("qdyn")

_INT = ("grid_n", "n_particles", "seed", "workers")
_FLOAT = ("dq", "dp", "dt", "t_final", "series_every", "snapshot_every")


def _add_packet_args(p):
    p.add_argument("--q0", type=float, default=-5.0)
    p.add_argument("--p0", type=float, default=1.0)
    p.add_argument("--sigma", type=float, default=1.0 / math.sqrt(2.0))


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qdyn", description="1-D wave-packet propagators and their comparison.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a scenario from a config file and/or flags")
    run.add_argument("--config", help="key = value config file")
    run.add_argument("--potential", choices=POTENTIALS)
    run.add_argument("--method", choices=METHODS)
    run.add_argument("--preset", choices=PRESETS)
    run.add_argument("--reference", choices=METHODS)
    run.add_argument("--out-dir", dest="out_dir")
    for key in _INT + _FLOAT:
        # parsed as strings so the config layer reports conversion errors uniformly
        run.add_argument("--" + key.replace("_", "-"), dest=key)

    cmp_ = sub.add_parser("compare", help="compare two run directories, writes compare.csv")
    cmp_.add_argument("dir_a")
    cmp_.add_argument("dir_b")
    cmp_.add_argument("--out", help="report path (default: <dir_a>/compare.csv)")

    orc = sub.add_parser("oracle", help="standalone oracles")
    osub = orc.add_subparsers(dest="oracle", required=True)
    ell = osub.add_parser("ellipse", help="initial Wigner weight above the barrier energy")
    ell.add_argument("--V0", type=float, default=1.0)
    ell.add_argument("--omega0", type=float, default=0.1)
    _add_packet_args(ell)
    bes = osub.add_parser("bessel", help="Chebyshev expansion order for argument x = a dt / hbar")
    bes.add_argument("--x", type=float, required=True)
    bes.add_argument("--cutoff", type=float, default=1e-16)
    bes.add_argument("--coefficients", action="store_true", help="also print J_0..J_M")
    dia = osub.add_parser("diag", help="exact propagation by diagonalization on a small grid")
    dia.add_argument("--potential", choices=POTENTIALS, default="barrier")
    dia.add_argument("--grid-n", dest="grid_n", type=int, default=128)
    dia.add_argument("--dq", type=float, default=0.32)
    dia.add_argument("--t", type=float, required=True)
    dia.add_argument("--out", help="write the density as q,density CSV")
    _add_packet_args(dia)
    return parser


def _cmd_run(args) -> int:
    cfg = parse_config(args.config) if args.config else RunConfig()
    keys = RunConfig.keys()
    overrides = {k: getattr(args, k) for k in keys if getattr(args, k, None) is not None}
    cfg = apply_overrides(cfg, overrides)
    summary = run_scenario(cfg)
    print(f"wrote {len(summary['records'])} time points to {summary['out_dir']} in {summary['wall_time']:.2f} s")
    return 0


def _cmd_compare(args) -> int:
    out = args.out or f"{args.dir_a}/compare.csv"
    rows = compare_runs(args.dir_a, args.dir_b, out)
    for r in rows:
        vals = ",".join(format_float(r[k]) for k in ("t", "L1", "L2", "Linf", "max_abs_dev"))
        print(f"{r['quantity']},{vals}")
    return 0


def _cmd_oracle(args) -> int:
    if args.oracle == "ellipse":
        packet = GaussianPacketSpec(args.q0, args.p0, args.sigma)
        spec = PotentialSpec.barrier(V0=args.V0, omega0=args.omega0)
        print(format_float(ellipse_transmission_oracle(packet, spec)))
    elif args.oracle == "bessel":
        M, j = chebyshev_order(args.x, args.cutoff)
        print(f"M = {M}")
        if args.coefficients:
            for k, v in enumerate(j):
                print(f"{k},{format_float(v)}")
    else:
        spec = getattr(PotentialSpec, args.potential)()
        grid = Grid1D.centered(args.grid_n, args.dq)
        psi = init_wavefunction(GaussianPacketSpec(args.q0, args.p0, args.sigma), grid)
        oracle = build_diag_oracle(spec, grid)
        out = diag_propagate(psi, oracle, args.t)
        rec = observables_from_density(args.t, out.density(), grid)
        print(",".join(f"{k}={format_float(v)}" for k, v in rec.as_dict().items() if k != "energy"))
        if args.out:
            write_density(args.out, grid.points, out.density())
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    handler = {"run": _cmd_run, "compare": _cmd_compare, "oracle": _cmd_oracle}[args.command]
    try:
        return handler(args)
    except NumericalInstabilityError as exc:
        print(f"qdyn: numerical instability: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except OSError as exc:
        print(f"qdyn: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (QdynError, ValueError, TypeError) as exc:
        print(f"qdyn: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
