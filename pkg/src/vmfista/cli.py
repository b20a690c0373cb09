"""Command-line front end.

Exit codes: 0 success, 2 configuration error, 3 solver failure, 4 I/O error.
"""

from __future__ import annotations

import argparse
import sys

from .exceptions import ConfigError, SolverError
from .harness import (config_from_mapping, parse_config_file, rate_report,
                      read_trace_csv, run_experiment, run_preset, RunConfig)

EXIT_CONFIG = 2
EXIT_SOLVER = 3
EXIT_IO = 4


def _add_run_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="flat key=value config file")
    p.add_argument("--problem", choices=("wl2tv-denoise", "kltv-deblur"))
    p.add_argument("--input", help="PGM source image")
    p.add_argument("--source", help="phantom name (piecewise|blobs)")
    p.add_argument("--scale", type=int)
    p.add_argument("--range-lo", type=float, dest="range_lo")
    p.add_argument("--range-hi", type=float, dest="range_hi")
    p.add_argument("--sigma-psf", type=float, dest="sigma_psf")
    p.add_argument("--lambda", type=float, dest="lam")
    p.add_argument("--b", type=float)
    p.add_argument("--eps-q", type=float, dest="eps_q")
    p.add_argument("--mu-f", dest="mu_f", help="'auto' or a number")
    p.add_argument("--mu-g", dest="mu_g", help="'auto' or a number")
    p.add_argument("--rho", type=float)
    p.add_argument("--delta", type=float)
    p.add_argument("--L0", type=float)
    p.add_argument("--t0", type=float)
    p.add_argument("--s1", type=float)
    p.add_argument("--s2", type=float)
    p.add_argument("--metric", choices=("identity", "split", "constant"))
    p.add_argument("--eps-mode", dest="eps_mode",
                   choices=("exact", "theta-adaptive", "geometric-squared",
                            "quadratic-schedule", "geometric"))
    p.add_argument("--eps-a", type=float, dest="eps_a")
    p.add_argument("--eps-b", type=float, dest="eps_b")
    p.add_argument("--eps-c", type=float, dest="eps_c")
    p.add_argument("--maxiter", type=int)
    p.add_argument("--max-bt", type=int, dest="max_bt")
    p.add_argument("--seed", type=int)
    p.add_argument("--reference-iters", type=int, dest="reference_iters")
    p.add_argument("--trace", help="trace CSV output path")
    p.add_argument("--out", help="restored image output (.pgm or flat binary)")
    p.add_argument("--outdir")
    p.add_argument("--label")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="vmfista",
        description="Variable-metric inexact accelerated forward-backward "
                    "solver for TV-regularized Poisson image restoration.")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run one experiment")
    _add_run_flags(p_run)

    p_preset = sub.add_parser("preset", help="run a named sweep")
    p_preset.add_argument("name",
                          choices=("moon-armijo-vs-adaptive", "deblur-phantom"))
    p_preset.add_argument("--scale", type=int, default=32)
    p_preset.add_argument("--outdir", default="runs")
    p_preset.add_argument("--seed", type=int, default=0)

    p_report = sub.add_parser("report", help="rate report from a trace CSV")
    p_report.add_argument("--trace", required=True)
    p_report.add_argument("--mu", type=float, default=0.0)
    p_report.add_argument("--mu-g", type=float, default=0.0, dest="mu_g")
    p_report.add_argument("--rho", type=float, default=0.8)
    p_report.add_argument("--L-f", type=float, default=None, dest="l_f")
    p_report.add_argument("--eta-sup", type=float, default=1.0, dest="eta_sup")
    return parser


def _run(args) -> int:
    mapping = parse_config_file(args.config) if args.config else {}
    cfg = config_from_mapping(mapping, RunConfig())
    flags = {k: v for k, v in vars(args).items()
             if k not in ("command", "config") and v is not None}
    cfg = config_from_mapping(flags, cfg)
    result = run_experiment(cfg)
    final = result.result.trace[-1]
    print(f"done: {len(result.result.trace)} iterations, "
          f"final eF {(final.F_value - result.f_star) / abs(result.f_star):.3e}")
    print(f"trace: {result.trace_path}")
    print(f"summary: {result.summary_path}")
    return 0


def _preset(args) -> int:
    results = run_preset(args.name, scale=args.scale, outdir=args.outdir,
                         seed=args.seed)
    for res in results:
        final = res.result.trace[-1]
        ef = (final.F_value - res.f_star) / abs(res.f_star)
        print(f"{res.config.label}: {len(res.result.trace)} iterations, "
              f"final eF {ef:.3e} -> {res.trace_path}")
    return 0


def _report(args) -> int:
    data = read_trace_csv(args.trace)
    report = rate_report(data["k"], data["eF"], mu=args.mu, rho=args.rho,
                         l_f=args.l_f, mu_g=args.mu_g, eta_sup=args.eta_sup)
    print(report.render())
    return 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "run":
            return _run(args)
        if args.command == "preset":
            return _preset(args)
        return _report(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SolverError as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
