"""Command-line entry point: ``sfem-sif <subcommand> [flags]``.

Exit codes: 0 success, 1 numerical failure, 2 usage error.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import bench
from .bench import (ReferenceError, ReferenceStore, SweepAborted, UsageError,
                    load_config, output_root)
from .fracture import ExtractionError
from .io import SIF_HEADER, write_csv
from .mesh import MeshError
from .solver import ConvergenceError, SolverError

NUMERICAL = (SolverError, ConvergenceError, ExtractionError, ReferenceError,
             SweepAborted, MeshError, ArithmeticError)


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _add_config_flags(p, densities=True):
    p.add_argument("--config", help="key = value file; flags override it")
    p.add_argument("--specimen", choices=("SEN", "CEN"), type=str.upper)
    p.add_argument("--element", type=str.upper)
    p.add_argument("--method", type=str.upper, help="FEM, ES, NS, ALPHA or ALPHA:<value>")
    p.add_argument("--alpha", type=float)
    p.add_argument("--pattern", type=str.upper)
    p.add_argument("--tip-modified", action="store_const", const=True, default=None)
    if densities:
        p.add_argument("--densities", help="comma-separated h/a values, e.g. 1/4,1/8")
    p.add_argument("--extractions", help="comma-separated: MCCI,VCE")
    p.add_argument("--E", dest="E", type=float)
    p.add_argument("--nu", type=float)
    p.add_argument("--t", type=float)
    p.add_argument("--sigma", type=float)
    p.add_argument("--a", type=float)
    p.add_argument("--output-dir")
    p.add_argument("--jobs", type=int)
    p.add_argument("--out", help="CSV path (default: stdout)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="sfem-sif", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    p = sub.add_parser("run", help="single case, one SIF row per extraction")
    _add_config_flags(p)
    p.add_argument("--no-reference", action="store_true",
                   help="leave err_vs_ref empty instead of requiring a reference")
    p.add_argument("--cod", help="also write the COD profile to this CSV")
    p = sub.add_parser("sweep-density", help="convergence table and log-log slope")
    _add_config_flags(p)
    p = sub.add_parser("sweep-alpha", help="K* over an alpha grid on one mesh")
    _add_config_flags(p)
    p.add_argument("--grid", help="comma-separated alpha values (default 0.30:0.70:0.01)")
    p = sub.add_parser("compare", help="method errors plus pattern/tip-mod deltas")
    _add_config_flags(p)
    p = sub.add_parser("build-reference", help="build and store the reference oracle")
    p.add_argument("--specimen", choices=("SEN", "CEN", "ALL"), type=str.upper, default="ALL")
    p.add_argument("--output-dir")
    p = sub.add_parser("export-fields", help="nodes.csv and domains.csv for one case")
    _add_config_flags(p)
    p.add_argument("--normalize", action="store_true", help="divide stresses by sigma")
    p.add_argument("--dir", help="target directory")
    return parser


_CONFIG_KEYS = ("specimen", "element", "method", "alpha", "pattern", "tip_modified",
                "densities", "extractions", "E", "nu", "t", "sigma", "a",
                "output_dir", "jobs")


def _config(args):
    values = {k: getattr(args, k, None) for k in _CONFIG_KEYS}
    if values["method"] and ":" in values["method"]:
        values["method"], _, alpha = values["method"].partition(":")
        values["alpha"] = float(alpha)
    for key in ("densities", "extractions"):
        if values[key] is not None:
            values[key] = bench._coerce(key, values[key])
    return load_config(args.config, **values)


def _store(cfg) -> ReferenceStore:
    return ReferenceStore(output_root(cfg))


def _emit(args, header, rows):
    target = Path(args.out) if getattr(args, "out", None) else sys.stdout
    write_csv(target, header, rows)


def cmd_run(args):
    cfg = _config(args)
    ref = None if args.no_reference else _store(cfg).load(cfg.specimen)
    rows, run = bench.run_case(cfg, reference=ref)
    _emit(args, SIF_HEADER, rows)
    if args.cod:
        header = ("x_over_a", "v", "v_ref", "ratio")
        profile = run.cod()
        cod = (bench.cod_rows(run, ref) if ref is not None else
               [{"x_over_a": x / cfg.a, "v": v} for x, v in zip(profile.x, profile.v)])
        write_csv(args.cod, header, cod)


def cmd_sweep_density(args):
    cfg = _config(args)
    ref = _store(cfg).load(cfg.specimen)
    try:
        result = bench.sweep_density(cfg, ref)
    except SweepAborted as exc:
        _emit(args, SIF_HEADER, exc.rows)
        raise
    _emit(args, SIF_HEADER + ("slope", "slope_exempt"),
          [dict(r, slope=result.slope, slope_exempt=result.slope_exempt)
           for r in result.rows])


def cmd_sweep_alpha(args):
    cfg = _config(args)
    ref = _store(cfg).load(cfg.specimen)
    grid = None if not args.grid else [float(g) for g in args.grid.split(",")]
    result = bench.sweep_alpha(cfg, ref, grid)
    _emit(args, ("alpha", "h_over_a", "K_star", "err_vs_ref", "U", "optimum"),
          [dict(r, optimum=int(r["alpha"] == result.optimum)) for r in result.rows])


def cmd_compare(args):
    cfg = _config(args)
    ref = _store(cfg).load(cfg.specimen)
    _emit(args, bench.compare_header(), bench.compare_methods(cfg, ref))


def cmd_build_reference(args):
    store = ReferenceStore(output_root(bench.RunConfig(output_dir=args.output_dir)))
    names = ("SEN", "CEN") if args.specimen == "ALL" else (args.specimen,)
    for name in names:
        path = store.save(bench.build_reference(name))
        print(path)


def cmd_export_fields(args):
    cfg = _config(args)
    for path in bench.export_fields(cfg, normalize=args.normalize, directory=args.dir):
        print(path)


COMMANDS = {
    "run": cmd_run,
    "sweep-density": cmd_sweep_density,
    "sweep-alpha": cmd_sweep_alpha,
    "compare": cmd_compare,
    "build-reference": cmd_build_reference,
    "export-fields": cmd_export_fields,
}


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"sfem-sif: usage error: {exc}", file=sys.stderr)
        return 2
    except NUMERICAL as exc:
        print(f"sfem-sif: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
