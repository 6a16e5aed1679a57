"""Command line entry point: ``annni-fidelity {sweep,grid,plot,spectrum}``.

Exit codes: 0 success, 2 validation error, 3 unconverged points present.

A ``--config`` file holds flat ``key = value`` lines whose keys are the long
option names with dashes or underscores (``n-sites = 16``, ``alpha_max = 0.7``).
Blank lines and ``#`` comments are ignored.  Flags on the command line win.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys

from .errors import AnnniError, ValidationError
from .hilbert import ChainSpec
from .lanczos import METHODS, SolverConfig, lanczos_lowest

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_UNCONVERGED = 3

log = logging.getLogger("annni_fidelity")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INVALID, f"{self.prog}: error: {message}\n")


def read_config(path) -> dict[str, str]:
    values = {}
    try:
        lines = open(path).read().splitlines()
    except OSError as exc:
        raise ValidationError(f"cannot read config {path}: {exc}") from exc
    for n, line in enumerate(lines, 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep or not key.strip():
            raise ValidationError(f"{path}:{n}: expected 'key = value'")
        values[key.strip().replace("-", "_")] = value.strip()
    return values


def _chain_args(p):
    p.add_argument("--n-sites", type=int, default=12)
    p.add_argument("--bx", type=float, default=0.2)
    p.add_argument("--j1", type=float, default=1.0)


def _solver_args(p):
    p.add_argument("--k", type=int, default=6, help="number of eigenpairs")
    p.add_argument("--tol", type=float, default=1e-10, help="residual tolerance")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--max-krylov", type=int, default=400)
    p.add_argument("--block-size", type=int, default=2)
    p.add_argument("--method", choices=METHODS, default="auto")
    p.add_argument("--backend", choices=("compiled", "python"), default=None)


def _sweep_args(p):
    _chain_args(p)
    _solver_args(p)
    p.add_argument("--alpha-min", type=float, default=0.2)
    p.add_argument("--alpha-max", type=float, default=0.8)
    p.add_argument("--points", type=int, default=241)
    p.add_argument("--d-alpha", type=float, default=1e-3)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out", default="sweep_out")
    p.add_argument("--resume", action="store_true", help="reuse rows already in OUT/sweep.csv")
    p.add_argument("--match-radius", type=float, default=None,
                   help="drop/crossing match radius (default 5 grid steps)")
    p.add_argument("--no-plots", action="store_true")
    p.add_argument("--config", default=None, help="key = value file; flags override it")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="annni-fidelity",
                     description="Fidelity sweeps and level crossings of the ANNNI chain.")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("sweep", help="alpha sweep at fixed B_x")
    _sweep_args(p)

    p = sub.add_parser("grid", help="one alpha sweep per B_x value")
    _sweep_args(p)
    p.add_argument("--bx-min", type=float, default=0.0)
    p.add_argument("--bx-max", type=float, default=0.3)
    p.add_argument("--bx-points", type=int, default=4)

    p = sub.add_parser("plot", help="write plot scripts for an existing sweep.csv")
    p.add_argument("csv")
    p.add_argument("--out", default=None, help="directory for the scripts (default: next to the csv)")
    p.add_argument("--report", default=None, help="crossings.json (default: next to the csv)")

    p = sub.add_parser("spectrum", help="lowest eigenvalues at one alpha")
    _chain_args(p)
    _solver_args(p)
    p.add_argument("--alpha", type=float, required=True)
    p.add_argument("--json", action="store_true", help="print JSON instead of a table")
    return parser


def _apply_config(parser, args, argv):
    if not getattr(args, "config", None):
        return args
    values = read_config(args.config)
    sub = parser._subparsers._group_actions[0].choices[args.command]
    actions = {a.dest: a for a in sub._actions}
    given = set()
    for tok in argv:
        if tok.startswith("--"):
            given.add(tok[2:].split("=", 1)[0].replace("-", "_"))
    for key, raw in values.items():
        if key not in actions or key in ("config", "help"):
            raise ValidationError(f"unknown config key {key!r}")
        if key in given:
            continue
        action = actions[key]
        if isinstance(action, argparse._StoreTrueAction):
            if raw.lower() not in ("true", "false", "1", "0", "yes", "no"):
                raise ValidationError(f"config key {key!r} needs a boolean, got {raw!r}")
            value = raw.lower() in ("true", "1", "yes")
        else:
            try:
                value = action.type(raw) if action.type else raw
            except ValueError as exc:
                raise ValidationError(f"config key {key!r}: {exc}") from None
            if action.choices is not None and value not in action.choices:
                raise ValidationError(f"config key {key!r} must be one of {list(action.choices)}")
        setattr(args, key, value)
    return args


def _solver(args) -> SolverConfig:
    return SolverConfig(k=args.k, tol=args.tol, max_krylov=args.max_krylov, seed=args.seed,
                        block_size=args.block_size, method=args.method)


def _sweep_spec(args):
    from .sweep import SweepSpec

    chain = ChainSpec(args.n_sites, args.alpha_min, args.bx, j1=args.j1)
    return SweepSpec(chain, alpha_min=args.alpha_min, alpha_max=args.alpha_max,
                     grid_points=args.points, d_alpha=args.d_alpha, solver=_solver(args),
                     workers=args.workers, output_dir=args.out, match_radius=args.match_radius,
                     backend=args.backend)


def _progress(done, total, row):
    flag = "" if row.converged else "  UNCONVERGED"
    log.info("[%d/%d] alpha=%.6f E0=%.12f F=%.10f%s", done, total, row.alpha, row.energies[0],
             row.fidelity, flag)


def _summarize(result, out=None):
    rep = result.report
    print(f"N={result.spec.chain.n_sites} B_x={result.spec.chain.bx:g}: {len(result.rows)} rows "
          f"-> {result.csv_path}", file=out)
    for c in rep.gs_crossings:
        print(f"  GS crossing  alpha={c.alpha:.6f} gap={c.gap:.2e}", file=out)
    for c in rep.es_crossings:
        print(f"  ES crossing  alpha={c.alpha:.6f} gap={c.gap:.2e}", file=out)
    for d, cls in zip(rep.fidelity_drops, rep.classifications):
        print(f"  F drop       alpha={d.alpha:.6f} F={d.f_min:.8f} {cls}", file=out)
    bad = result.unconverged
    if bad:
        print(f"  unconverged at alpha = {', '.join(f'{a:.6g}' for a in bad)}", file=out)
    return bool(bad)


def cmd_sweep(args) -> int:
    from .sweep import run_sweep

    result = run_sweep(_sweep_spec(args), resume=args.resume, emit=not args.no_plots,
                       progress=_progress)
    return EXIT_UNCONVERGED if _summarize(result) else EXIT_OK


def cmd_grid(args) -> int:
    from .sweep import run_grid

    results = run_grid(_sweep_spec(args), args.bx_min, args.bx_max, args.bx_points,
                       resume=args.resume, emit=not args.no_plots, progress=_progress)
    bad = [_summarize(r) for r in results]
    return EXIT_UNCONVERGED if any(bad) else EXIT_OK


def cmd_plot(args) -> int:
    from .plots import emit_plots

    for path in emit_plots(args.csv, args.out, args.report):
        print(path)
    return EXIT_OK


def cmd_spectrum(args) -> int:
    chain = ChainSpec(args.n_sites, args.alpha, args.bx, j1=args.j1)
    sp = lanczos_lowest(chain, _solver(args), backend=args.backend)
    if args.json:
        doc = {"n_sites": chain.n_sites, "alpha": chain.alpha, "bx": chain.bx,
               "method": sp.method, "converged": bool(sp.converged),
               "eigenvalues": sp.eigenvalues.tolist(),
               "residual_norms": sp.residual_norms.tolist(),
               "labels": list(sp.labels) if sp.labels is not None else None}
        print(json.dumps(doc, indent=2))
    else:
        print(f"# N={chain.n_sites} alpha={chain.alpha:g} B_x={chain.bx:g} method={sp.method}")
        print("# m  E_m  residual  label")
        labels = sp.labels if sp.labels is not None else [""] * sp.k
        for m, (e, r, lab) in enumerate(zip(sp.eigenvalues, sp.residual_norms, labels)):
            print(f"{m:3d}  {e:.15f}  {r:.2e}  {lab}")
    return EXIT_OK if sp.converged else EXIT_UNCONVERGED


COMMANDS = {"sweep": cmd_sweep, "grid": cmd_grid, "plot": cmd_plot, "spectrum": cmd_spectrum}


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:   # --help, or a usage error already reported
        return int(exc.code or 0)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(message)s")
    try:
        args = _apply_config(parser, args, argv)
        return COMMANDS[args.command](args)
    except ValidationError as exc:
        print(f"annni-fidelity: error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except AnnniError as exc:
        print(f"annni-fidelity: error: {exc}", file=sys.stderr)
        return EXIT_UNCONVERGED


if __name__ == "__main__":
    sys.exit(main())
