"""Command-line entry point: ``vvof run|case|list|convergence``."""
from __future__ import annotations

import argparse
import sys

from .cases import CASE_NAMES, CaseError, builtin_case, run_case
from .curvature import compute_curvature
from .io import (
    ConfigError, output_dir, parse_config, write_contours, write_diagnostics, write_rp_history,
    write_snapshot,
)
from .metrics import convergence_order, extract_contour, l1_error

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 1, 2

# stop reasons that end a run as planned rather than abort it
_PLANNED_STOPS = ("", "radius below resolution limit")
# cases that return to their initial state, so the final error is measurable
REVERSIBLE = ("zalesak", "vortex-star", "deformation-sphere")


def _parse_grid(text):
    try:
        cells = [int(v) for v in text.split(",")]
    except ValueError:
        raise ConfigError("--grid", f"expected N or N,N[,N], got {text!r}") from None
    if len(cells) not in (1, 2, 3) or min(cells) < 3:
        raise ConfigError("--grid", f"expected 1 to 3 counts of at least 3, got {text!r}")
    return cells[0] if len(cells) == 1 else tuple(cells)


def _execute(config, out, quiet=False):
    out.mkdir(parents=True, exist_ok=True)
    stem = config.name

    def snapshot(snap):
        aux = {}
        if config.motion.needs_curvature:
            aux["kappa"] = compute_curvature(snap.field, config.clip_eps).kappa
        base = out / f"{stem}_{snap.step:07d}"
        write_snapshot(snap.field, base.with_suffix(".vtk"), aux,
                       title=f"{stem} step {snap.step} t={snap.t:.17g}")
        if snap.field.grid.ndim == 2:
            write_contours(extract_contour(snap.field), f"{base}_contour.csv")

    result = run_case(config, on_snapshot=snapshot)
    diag = result.diagnostics
    write_diagnostics(diag, out / f"{stem}_diagnostics.csv", config.csv_stride)
    if result.rp_history:
        write_rp_history(result.rp_history, out / f"{stem}_rp.csv")
    last = diag.records[-1]
    if not quiet:
        print(f"{stem}: {len(diag) - 1} steps to t={last.t:.6g} on {config.cells}, "
              f"V/V0-1={last.volume_norm - 1:+.3e}, outputs in {out}")
    if diag.stop_reason not in _PLANNED_STOPS:
        print(f"{stem}: aborted at step {diag.stop_step}: {diag.stop_reason}", file=sys.stderr)
        return EXIT_RUNTIME, result
    if diag.stop_reason:
        print(f"{stem}: stopped at step {diag.stop_step}: {diag.stop_reason}")
    return EXIT_OK, result


def _cmd_run(args):
    config = parse_config(args.config)
    return _execute(config, output_dir(config, args.out))[0]


def _cmd_case(args):
    config = builtin_case(args.id, args.resolution)
    if args.grid is not None or args.dt is not None:
        config = config.with_grid(_parse_grid(args.grid) if args.grid else config.cells, args.dt)
    return _execute(config, output_dir(config, args.out))[0]


def _cmd_list(args):
    for name in CASE_NAMES:
        print(name)
    return EXIT_OK


def _cmd_convergence(args):
    if args.id not in REVERSIBLE:
        raise ConfigError("id", f"convergence needs a case that returns to its initial state: "
                                f"{', '.join(REVERSIBLE)}")
    base = builtin_case(args.id)
    grids = [_parse_grid(g) for g in args.grids.split(",")]
    errors = []
    print(f"{'N':>6} {'dt':>12} {'L1':>14} {'order':>8}")
    for n in grids:
        config = base.with_grid(n)
        result = run_case(config)
        if result.diagnostics.stop_reason:
            print(f"{args.id}: aborted on {config.cells}: {result.diagnostics.stop_reason}",
                  file=sys.stderr)
            return EXIT_RUNTIME
        errors.append((config.cells[0], l1_error(result.final, result.initial)))
        order = convergence_order(errors)[-1] if len(errors) > 1 else float("nan")
        print(f"{config.cells[0]:>6} {config.time_step:>12.6g} {errors[-1][1]:>14.6e} {order:>8.3f}",
              flush=True)
    return EXIT_OK


def build_parser():
    p = argparse.ArgumentParser(prog="vvof", description="Volume-of-fluid interface evolution.")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run a JSON config file")
    r.add_argument("config")
    r.add_argument("--out", help="output directory (default: config, $VVOF_OUT, ./vvof_out)")
    r.set_defaults(func=_cmd_run)

    c = sub.add_parser("case", help="run a built-in case")
    c.add_argument("id", choices=CASE_NAMES, metavar="id")
    c.add_argument("--grid", help="cells, N or N,N[,N]")
    c.add_argument("--dt", type=float, help="time step")
    c.add_argument("--resolution", type=int, default=0, help="index into the case's grid list")
    c.add_argument("--out", help="output directory")
    c.set_defaults(func=_cmd_case)

    ls = sub.add_parser("list", help="list built-in case ids")
    ls.set_defaults(func=_cmd_list)

    v = sub.add_parser("convergence", help="L1 refinement study of a reversible case")
    v.add_argument("id", choices=CASE_NAMES, metavar="id")
    v.add_argument("--grids", default="32,64,128,256", help="comma-separated cells per axis")
    v.set_defaults(func=_cmd_convergence)
    return p


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 2 on bad usage; that is a config error here
        return EXIT_OK if exc.code == 0 else EXIT_CONFIG
    try:
        return args.func(args)
    except (ConfigError, CaseError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
