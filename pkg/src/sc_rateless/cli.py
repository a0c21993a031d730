"""Command-line front end.

Four subcommands wire the library into reproducible experiments:

    threshold   one DE overhead threshold plus its stability lower bounds
    bounds      the stability report alone (no DE runs)
    sweep       thresholds over an L grid, optionally crossed with a dr grid
    simulate    finite-length Monte Carlo decoding trials over an alpha grid

Output is CSV with '#'-prefixed header lines carrying the full experiment
spec (parameters, seed, tool version), or a single JSON document with the
same content.  Identical inputs produce byte-identical output files.

Exit codes: 0 success, 2 validation error, 3 computation error.
"""
from __future__ import annotations

import argparse
import dataclasses
import json
import math
import sys
from concurrent.futures import ProcessPoolExecutor

from . import __version__
from .codec import InvalidM, monte_carlo
from .density import (
    DEConfig,
    NoSuccessInBracket,
    NonMonotoneBracket,
    overhead_threshold,
    threshold_sweep,
)
from .ensemble import EnsembleParams
from .stability import NonConvergence, threshold_lower_bounds

_Z95 = 1.959963984540054


def _int_list(text: str) -> list[int]:
    return [int(part) for part in text.split(",") if part]


def _float_list(text: str) -> list[float]:
    return [float(part) for part in text.split(",") if part]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sc-rateless",
        description="Thresholds, stability bounds, and Monte Carlo decoding "
        "for spatially-coupled precoded rateless codes on the BEC.",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--dl", type=int, default=2, help="precode bit degree (default 2)")
    common.add_argument("--dr", type=int, default=3, help="precode check degree (default 3)")
    common.add_argument("--dg", type=int, required=True, help="channel-node degree")
    common.add_argument("--w", type=int, default=2, help="coupling width (default 2)")
    common.add_argument("--eps", type=float, default=0.5, help="BEC erasure rate (default 0.5)")
    common.add_argument("--allow-dg1", action="store_true",
                        help="let the threshold search / simulator run with dg = 1")
    common.add_argument("--format", choices=("csv", "json"), default="csv")
    common.add_argument("--out", default=None, help="output path (default: stdout)")
    common.add_argument("--seed", type=int, default=0)

    deconf = argparse.ArgumentParser(add_help=False)
    deconf.add_argument("--max-iter", type=int, default=DEConfig.max_iterations)
    deconf.add_argument("--fp-tol", type=float, default=DEConfig.fixed_point_tol)
    deconf.add_argument("--success-target", type=float, default=DEConfig.success_target)
    deconf.add_argument("--bisect-tol", type=float, default=DEConfig.bisection_tol)

    p = sub.add_parser("threshold", parents=[common, deconf],
                       help="DE overhead threshold at one chain length")
    p.add_argument("--L", type=int, required=True)

    p = sub.add_parser("bounds", parents=[common],
                       help="stability lower bounds at one chain length")
    p.add_argument("--L", type=int, required=True)

    p = sub.add_parser("sweep", parents=[common, deconf],
                       help="threshold sweep over chain lengths")
    p.add_argument("--L-grid", type=_int_list, required=True,
                   help="comma-separated chain lengths")
    p.add_argument("--dr-grid", type=_int_list, default=None,
                   help="comma-separated check degrees (one sweep per entry)")
    p.add_argument("--workers", type=int, default=1,
                   help="parallel workers across dr-grid entries")

    p = sub.add_parser("simulate", parents=[common],
                       help="finite-length Monte Carlo decoding trials")
    p.add_argument("--L", type=int, required=True)
    p.add_argument("--M", type=int, required=True, help="bits per section")
    p.add_argument("--trials", type=int, required=True)
    grid = p.add_mutually_exclusive_group(required=True)
    grid.add_argument("--alpha", type=float, default=None, help="single overhead point")
    grid.add_argument("--alpha-grid", type=_float_list, default=None,
                      help="comma-separated overhead points")
    p.add_argument("--zero-codeword", action="store_true",
                   help="skip the encoder and transmit the all-zero codeword "
                   "(exact on the BEC; intended for large sweeps)")
    p.add_argument("--workers", type=int, default=1, help="parallel trial workers")

    return parser


def _ensemble(args, L: int) -> EnsembleParams:
    return EnsembleParams(dl=args.dl, dr=args.dr, dg=args.dg, L=L, w=args.w,
                          epsilon=args.eps)


def _deconfig(args) -> DEConfig:
    return DEConfig(
        max_iterations=args.max_iter,
        fixed_point_tol=args.fp_tol,
        success_target=args.success_target,
        bisection_tol=args.bisect_tol,
    )


def _spec_header(args, extra: dict) -> dict:
    spec = {
        "command": args.command,
        "version": __version__,
        "dl": args.dl,
        "dr": args.dr,
        "dg": args.dg,
        "w": args.w,
        "eps": args.eps,
        "seed": args.seed,
    }
    spec.update(extra)
    return spec


def _bound_fields(report) -> dict:
    return {
        "lower_bound_alpha": report.lower_bound_alpha,
        "lower_bound_beta": report.lower_bound_beta,
    }


def cmd_threshold(args):
    params = _ensemble(args, args.L)
    config = _deconfig(args)
    report = threshold_lower_bounds(params)
    result = overhead_threshold(params, config, allow_dg1=args.allow_dg1)
    row = {
        "L": args.L,
        "alpha_star": result.alpha_star,
        "beta_star": result.beta_star,
        **_bound_fields(report),
        "iterations": result.iterations_at_threshold,
    }
    spec = _spec_header(args, {"L": args.L, **dataclasses.asdict(config)})
    return spec, [row]


def cmd_bounds(args):
    params = _ensemble(args, args.L)
    report = threshold_lower_bounds(params)
    row = {"L": args.L, **dataclasses.asdict(report)}
    spec = _spec_header(args, {"L": args.L})
    return spec, [row]


def _sweep_curve(job):
    params, L_grid, config, allow_dg1 = job
    return threshold_sweep(params, L_grid, config, allow_dg1=allow_dg1)


def cmd_sweep(args):
    config = _deconfig(args)
    dr_grid = args.dr_grid if args.dr_grid else [args.dr]
    jobs = []
    for dr in sorted(dr_grid):
        base = argparse.Namespace(**vars(args))
        base.dr = dr
        jobs.append((_ensemble(base, max(args.L_grid)), args.L_grid, config,
                     args.allow_dg1))
    if args.workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=args.workers) as pool:
            curves = list(pool.map(_sweep_curve, jobs))
    else:
        curves = [_sweep_curve(job) for job in jobs]
    rows = []
    for (params, _, _, _), curve in zip(jobs, curves):
        for entry in curve:
            rows.append({
                "dr": params.dr,
                "L": entry.L,
                "alpha_star": entry.alpha_star,
                "beta_star": entry.beta_star,
                "lower_bound_alpha": entry.lower_bound_alpha,
                "lower_bound_beta": entry.lower_bound_beta,
                "iterations": entry.iterations,
                "error": entry.error,
            })
    spec = _spec_header(args, {
        "L_grid": ",".join(map(str, sorted(args.L_grid))),
        "dr_grid": ",".join(map(str, sorted(dr_grid))),
        **dataclasses.asdict(config),
    })
    return spec, rows


def _wilson(successes: float, n: int) -> tuple[float, float]:
    if n == 0:
        return math.nan, math.nan
    phat = successes
    denom = 1.0 + _Z95 ** 2 / n
    center = (phat + _Z95 ** 2 / (2 * n)) / denom
    half = _Z95 * math.sqrt(phat * (1 - phat) / n + _Z95 ** 2 / (4 * n * n)) / denom
    return center - half, center + half


def cmd_simulate(args):
    params = _ensemble(args, args.L)
    alphas = args.alpha_grid if args.alpha_grid is not None else [args.alpha]
    results = monte_carlo(
        params, args.M, alphas, args.trials, args.seed,
        zero_codeword=args.zero_codeword,
        allow_dg1=args.allow_dg1,
        workers=args.workers,
    )
    rows = []
    for row in results:
        lo, hi = _wilson(row.success_rate, row.trials)
        rows.append({
            "alpha": row.alpha,
            "n_symbols": row.n_symbols,
            "dimension": row.dimension,
            "success_rate": row.success_rate,
            "wilson_low": lo,
            "wilson_high": hi,
            "mean_residual": row.mean_residual,
            "trials": row.trials,
            "trial_errors": row.trial_errors,
        })
    spec = _spec_header(args, {
        "L": args.L,
        "M": args.M,
        "trials": args.trials,
        "alpha_grid": ",".join(repr(a) for a in sorted(alphas)),
        "zero_codeword": args.zero_codeword,
    })
    return spec, rows


def _format_cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return str(value).lower()
    if isinstance(value, float):
        return repr(value)
    return str(value)


def render_csv(spec: dict, rows: list[dict]) -> str:
    lines = [f"# {key}={_format_cell(value)}" for key, value in spec.items()]
    if rows:
        columns = list(rows[0])
        lines.append(",".join(columns))
        for row in rows:
            lines.append(",".join(_format_cell(row[c]) for c in columns))
    return "\n".join(lines) + "\n"


def render_json(spec: dict, rows: list[dict]) -> str:
    def clean(value):
        if isinstance(value, float) and math.isnan(value):
            return None
        return value

    doc = {
        "spec": spec,
        "rows": [{k: clean(v) for k, v in row.items()} for row in rows],
    }
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


_DISPATCH = {
    "threshold": cmd_threshold,
    "bounds": cmd_bounds,
    "sweep": cmd_sweep,
    "simulate": cmd_simulate,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else 2

    try:
        spec, rows = _DISPATCH[args.command](args)
    except (InvalidM, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (NoSuccessInBracket, NonMonotoneBracket, NonConvergence) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3

    text = render_csv(spec, rows) if args.format == "csv" else render_json(spec, rows)
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="\n") as handle:
            handle.write(text)
    else:
        sys.stdout.write(text)
    return 0


def entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry()
