"""Command-line entry points.

Subcommands:
  critvals    simulate (or dump) the pivot critical-value table as CSV
  coverage    run a Monte-Carlo coverage study from a config file
  density     histogram the simulated pivot (or its denominator) as CSV
  alpha-star  print the error-optimal step-size exponent for a moment order
  single-run  trace per-step confidence intervals along one trajectory

Report paths write CSV; unless --no-figure is given, a PNG with the same
stem is rendered alongside. SAINFER_THREADS overrides --threads.
"""

from __future__ import annotations

import argparse
import math
import sys
from pathlib import Path

from . import plots
from .critvals import (DEFAULT_REPS, DEFAULT_STEPS, embedded_table,
                       empirical_density, simulate_fm_samples,
                       simulate_hm_samples, simulate_table)
from .harness import (emit_report, load_config, optimal_alpha, resolve_threads,
                      run_coverage, single_run_trace)

_M_CHOICES = {"1": 1, "2": 2, "3": 3, "4": 4, "6": 6, "inf": math.inf}


def _parse_m_list(text: str):
    out = []
    for tok in text.split(","):
        tok = tok.strip().lower()
        if tok not in _M_CHOICES:
            raise argparse.ArgumentTypeError(
                f"m must be from {sorted(_M_CHOICES)}, got {tok!r}")
        out.append(_M_CHOICES[tok])
    return out


def _figure_path(out: Path) -> Path:
    return out.with_suffix(".png")


def _cmd_critvals(args) -> int:
    threads = resolve_threads(args.threads)
    if args.embedded:
        table = embedded_table()
    else:
        table = simulate_table(steps=args.steps, reps=args.reps,
                               seed=args.seed, threads=threads)
    out = Path(args.out)
    lines = ["m,level,q,provenance"]
    for m, level, q, provenance in table.rows():
        m_txt = "inf" if m == math.inf else str(int(m))
        lines.append(f"{m_txt},{level:g},{q:.6g},{provenance}")
    out.write_text("\n".join(lines) + "\n")
    print(f"wrote {len(table.m_list) * len(table.levels)} critical values "
          f"to {out}")
    return 0


def _cmd_coverage(args) -> int:
    config = load_config(args.config)
    if args.seed is not None:
        config = config.with_seed(args.seed)
    threads = resolve_threads(args.threads)
    report = run_coverage(config, threads=threads)
    out = Path(args.out or config.out or "coverage.csv")
    emit_report(report, out)
    if not args.no_figure:
        plots.render_coverage(report, _figure_path(out), level=config.level)
    for row in report.rows:
        m_txt = "-" if row.m is None else ("inf" if row.m == math.inf
                                           else str(int(row.m)))
        print(f"{row.method} m={m_txt}: coverage={row.coverage:.3f} "
              f"mean_length={row.mean_length:.6g} failed={row.failed}")
    print(f"wrote {out}")
    return 0


def _cmd_density(args) -> int:
    threads = resolve_threads(args.threads)
    m_list = _parse_m_list(args.m)
    kinds = ("f", "h") if args.kind == "both" else (args.kind,)
    out = Path(args.out)
    lines = ["kind,m,bin_left,bin_right,density"]
    hists = {}
    for kind in kinds:
        simulate = (simulate_fm_samples if kind == "f"
                    else simulate_hm_samples)
        for m in m_list:
            samples = simulate(m, args.steps, args.reps, args.seed, threads)
            hist = empirical_density(samples, args.bins,
                                     nonnegative=kind == "h")
            hists[(kind, m)] = hist
            m_txt = "inf" if m == math.inf else str(int(m))
            for i in range(hist.density.size):
                lines.append(f"{kind},{m_txt},{hist.edges[i]:.6g},"
                             f"{hist.edges[i + 1]:.6g},{hist.density[i]:.6g}")
    out.write_text("\n".join(lines) + "\n")
    if not args.no_figure:
        for kind in kinds:
            name = (f"{out.stem}_{kind}.png" if len(kinds) > 1
                    else f"{out.stem}.png")
            plots.render_density(
                {m: hists[(kind, m)] for m in m_list},
                out.with_name(name), kind=kind)
    print(f"wrote {out}")
    return 0


def _cmd_alpha_star(args) -> int:
    alpha, rate = optimal_alpha(args.p, not args.iid, eps=args.eps)
    print(f"alpha_star={alpha:.6g} rate_exponent={rate:.6g}")
    if args.out:
        Path(args.out).write_text(
            "p,markovian_or_nonlinear,alpha_star,rate_exponent\n"
            f"{args.p:g},{not args.iid},{alpha:.6g},{rate:.6g}\n")
    return 0


def _cmd_single_run(args) -> int:
    config = load_config(args.config)
    if args.seed is not None:
        config = config.with_seed(args.seed)
    trace = single_run_trace(config, stride=args.stride)
    out = Path(args.out or config.out or "single_run.csv")
    lines = ["t,center,lo,hi"]
    for t, c, h in zip(trace.steps, trace.centers, trace.halfwidths):
        lines.append(f"{t},{c:.6g},{c - h:.6g},{c + h:.6g}")
    out.write_text("\n".join(lines) + "\n")
    if not args.no_figure:
        plots.render_ci_trace(trace, _figure_path(out))
    print(f"wrote {out} (target {trace.target:.6g})")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sainfer",
        description="Online confidence intervals for stochastic "
                    "approximation on Markovian data")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("critvals", help="simulate the critical-value table")
    p.add_argument("--steps", type=int, default=DEFAULT_STEPS)
    p.add_argument("--reps", type=int, default=DEFAULT_REPS)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threads", type=int, default=None)
    p.add_argument("--embedded", action="store_true",
                   help="dump the embedded defaults instead of simulating")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_critvals)

    p = sub.add_parser("coverage", help="run a coverage experiment")
    p.add_argument("--config", required=True)
    p.add_argument("--seed", type=int, default=None,
                   help="override run.seed from the config")
    p.add_argument("--threads", type=int, default=None)
    p.add_argument("--out", default=None)
    p.add_argument("--no-figure", action="store_true")
    p.set_defaults(func=_cmd_coverage)

    p = sub.add_parser("density", help="histogram the simulated pivot law")
    p.add_argument("--m", default="2", help="comma list from {1,2,3,4,6,inf}")
    p.add_argument("--kind", choices=("f", "h", "both"), default="f",
                   help="pivot (f), denominator (h), or both")
    p.add_argument("--steps", type=int, default=DEFAULT_STEPS)
    p.add_argument("--reps", type=int, default=DEFAULT_REPS)
    p.add_argument("--bins", type=int, default=120)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threads", type=int, default=None)
    p.add_argument("--out", required=True)
    p.add_argument("--no-figure", action="store_true")
    p.set_defaults(func=_cmd_density)

    p = sub.add_parser("alpha-star", help="error-optimal step-size exponent")
    p.add_argument("--p", type=float, required=True, help="moment order > 2")
    p.add_argument("--iid", action="store_true",
                   help="i.i.d. linear regime instead of Markovian/nonlinear")
    p.add_argument("--eps", type=float, default=0.0)
    p.add_argument("--out", default=None)
    p.set_defaults(func=_cmd_alpha_star)

    p = sub.add_parser("single-run", help="per-step CI trace of one run")
    p.add_argument("--config", required=True)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--stride", type=int, default=100)
    p.add_argument("--out", default=None)
    p.add_argument("--no-figure", action="store_true")
    p.set_defaults(func=_cmd_single_run)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
