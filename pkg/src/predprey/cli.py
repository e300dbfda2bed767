"""Command-line front end.

Subcommands: ``run`` (one simulation), ``matrix`` (replication matrix with
timing summary), ``compare`` (cross-variant rank tests over focal
measures), ``check-repro`` (byte-identity of repeated runs), and ``plot``
(render a figure from an emitted CSV). Exit codes: 0 success, 2 usage
error, 3 configuration refusal, 4 runtime failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import sys
from pathlib import Path

from . import bench, plots
from .errors import ConfigurationError, SimulationError
from .params import (
    DEFAULT_ITERATIONS,
    DYNAMICS_PRESETS,
    STEADY_STATE_CUTOFF,
    DynamicsParams,
    SizeParams,
    size_preset,
)
from .rng import parse_seed
from .scheduling import DEFAULT_BLOCK, STRATEGIES

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_CONFIG = 3
EXIT_RUNTIME = 4

_DYNAMICS_FLAGS = {
    "gain_prey": "--gain-prey",
    "gain_predator": "--gain-predator",
    "loss_prey": "--loss-prey",
    "loss_predator": "--loss-predator",
    "repro_threshold_prey": "--repro-threshold-prey",
    "repro_threshold_predator": "--repro-threshold-predator",
    "repro_prob_prey": "--repro-prob-prey",
    "repro_prob_predator": "--repro-prob-predator",
    "cell_restart": "--cell-restart",
}


def _add_model_options(p: argparse.ArgumentParser) -> None:
    p.add_argument("--strategy", choices=STRATEGIES, default="st")
    p.add_argument("--workers", type=int, default=1, metavar="N")
    p.add_argument("--block", type=int, default=DEFAULT_BLOCK, metavar="B",
                   help="on-demand block size")
    p.add_argument("--size", type=int, metavar="S",
                   help="named size preset (100, 200, 400, 800, 1600, ...); default 100")
    p.add_argument("--grid", type=int, nargs=2, metavar=("X", "Y"),
                   help="explicit grid dimensions (with --prey/--predators)")
    p.add_argument("--prey", type=int, metavar="P", help="initial prey count")
    p.add_argument("--predators", type=int, metavar="W", help="initial predator count")
    p.add_argument("--params", type=int, choices=(1, 2), default=1,
                   help="dynamics preset; explicit dynamics flags override fields")
    for dest, flag in _DYNAMICS_FLAGS.items():
        p.add_argument(flag, type=int, dest=dest, default=None, help=argparse.SUPPRESS)
    p.add_argument("--iters", type=int, default=DEFAULT_ITERATIONS, metavar="M")
    seed_group = p.add_mutually_exclusive_group()
    seed_group.add_argument("--rep", type=int, default=1, metavar="R",
                            help="replication number; its hash seeds the run")
    seed_group.add_argument("--seed", type=str, default=None, metavar="HEX128",
                            help="explicit 128-bit hex seed")


def _size_from_args(args) -> tuple[SizeParams, str]:
    if args.grid is not None:
        if args.prey is None or args.predators is None:
            raise ConfigurationError("--grid requires --prey and --predators")
        size = SizeParams(
            width=args.grid[0], height=args.grid[1],
            initial_prey=args.prey, initial_predators=args.predators,
            iterations=args.iters,
        )
        return size, f"{args.grid[0]}x{args.grid[1]}"
    preset = args.size if args.size is not None else 100
    return size_preset(preset, iterations=args.iters), str(preset)


def _dynamics_from_args(args) -> tuple[DynamicsParams, str]:
    dyn = DYNAMICS_PRESETS[args.params]
    overrides = {k: getattr(args, k) for k in _DYNAMICS_FLAGS if getattr(args, k) is not None}
    if overrides:
        dyn = dataclasses.replace(dyn, **overrides)
        return dyn, "custom"
    return dyn, str(args.params)


def _spec_from_args(args) -> bench.RunSpec:
    size, size_label = _size_from_args(args)
    dyn, params_label = _dynamics_from_args(args)
    seed = parse_seed(args.seed) if args.seed is not None else None
    return bench.RunSpec(
        strategy=args.strategy,
        size=size,
        dynamics=dyn,
        workers=args.workers,
        block=args.block,
        replication=args.rep,
        seed=seed,
        size_label=size_label,
        params_label=params_label,
    )


def _cmd_run(args) -> int:
    spec = _spec_from_args(args)
    out = Path(args.out)
    if args.record_rng_tape:
        result, sim = bench.run_single(spec, out=out, record_tape=True)
        tape_path = Path(args.record_rng_tape)
        with open(tape_path, "w") as fh:
            fh.write("worker,step,bound,value\n")
            for w in range(spec.workers):
                for i, (n, v) in enumerate(sim.world.tape_for(w)):
                    fh.write(f"{w},{i},{n},{v}\n")
        print(f"draw tape: {tape_path}")
    else:
        result = bench.run_single(spec, out=out)
    print(f"strategy={spec.strategy} workers={spec.workers} seed={spec.seed_text()}")
    print(f"series: {result.csv_path} ({spec.size.iterations + 1} records)")
    print(f"wall time: {result.wall_time:.3f} s")
    if args.plot:
        fig = plots.plot_series(result.csv_path, out.with_suffix(".png"), title=spec.label())
        print(f"figure: {fig}")
    return EXIT_OK


def _parse_list(text: str, conv=int) -> list:
    return [conv(part) for part in text.split(",") if part]


def _cmd_matrix(args) -> int:
    sizes = _parse_list(args.sizes)
    params_sets = _parse_list(args.params)
    strategies = [s.strip() for s in args.strategies.split(",") if s.strip()]
    workers = _parse_list(args.workers)
    blocks = _parse_list(args.blocks)
    specs = []
    for strat in strategies:
        if strat not in STRATEGIES:
            raise ConfigurationError(f"unknown strategy {strat!r}")
        worker_counts = [1] if strat == "st" else workers
        block_sizes = blocks if strat == "od" else [DEFAULT_BLOCK]
        for size in sizes:
            for pset in params_sets:
                for n in worker_counts:
                    for b in block_sizes:
                        specs.append(
                            bench.preset_spec(
                                strat, size, pset, workers=n, block=b, iterations=args.iters
                            )
                        )
    result = bench.run_matrix(specs, args.reps, args.out_dir, write_series=not args.no_series)
    print(f"matrix: {len(specs)} cells x {args.reps} replications -> {args.out_dir}")
    for row in result.summary_rows:
        mean_s = row[6] if row[6] else "-"
        rsd = f" rsd={row[7]}%" if row[7] else ""
        print(f"  {row[0]} size={row[1]} set={row[2]} n={row[3]} b={row[4]}: "
              f"mean={mean_s}s{rsd} [{row[8]}]")
    if args.plot:
        fig = plots.plot_matrix_summary(result.summary_rows, Path(args.out_dir) / "summary.png")
        print(f"figure: {fig}")
    if not result.ok:
        print(f"{result.failures} run(s) failed", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


def _cmd_compare(args) -> int:
    if args.cutoff is not None:
        cutoff = args.cutoff
    else:
        cutoff = STEADY_STATE_CUTOFF[args.params]
    variants: dict[str, list[str]] = {}
    for group in args.variant:
        name, *paths = group
        if not paths:
            raise ConfigurationError(f"variant {name!r} lists no series files")
        variants.setdefault(name, []).extend(paths)
    rows = bench.compare_series_files(variants, cutoff, out=args.out)
    low_05 = sum(1 for r in rows if float(r[2]) < 0.05)
    low_01 = sum(1 for r in rows if float(r[2]) < 0.01)
    print(f"comparison: {args.out} ({len(rows)} tests, {low_05} below 0.05, {low_01} below 0.01)")
    if args.plot:
        fig = plots.plot_comparison(rows, Path(args.out).with_suffix(".png"))
        print(f"figure: {fig}")
    return EXIT_OK


def _cmd_check_repro(args) -> int:
    spec = _spec_from_args(args)
    report = bench.check_reproducibility(spec, repeats=args.repeats)
    print(f"{spec.strategy} workers={spec.workers} repeats={args.repeats}: {report.verdict()}")
    return EXIT_OK if report.passed else EXIT_RUNTIME


def _cmd_plot(args) -> int:
    out = Path(args.out)
    if args.series:
        plots.plot_series(args.series, out)
    elif args.summary:
        import csv

        with open(args.summary, newline="") as fh:
            rows = list(csv.reader(fh))[1:]
        plots.plot_matrix_summary(rows, out)
    else:
        import csv

        with open(args.comparison, newline="") as fh:
            rows = list(csv.reader(fh))[1:]
        plots.plot_comparison(rows, out)
    print(f"figure: {out}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="predprey",
        description="Multithreaded predator-prey grid simulation benchmark harness",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run one simulation and write its series CSV")
    _add_model_options(p_run)
    p_run.add_argument("--out", required=True, metavar="PATH", help="series CSV path")
    p_run.add_argument("--plot", action="store_true", help="render the dynamics figure")
    p_run.add_argument("--record-rng-tape", metavar="PATH", default=None,
                       help="dump the draw schedule (small grids only)")
    p_run.set_defaults(func=_cmd_run)

    p_matrix = sub.add_parser("matrix", help="run a replication matrix with timing summary")
    p_matrix.add_argument("--strategies", default="st,eq,ex,er,od")
    p_matrix.add_argument("--sizes", default="100")
    p_matrix.add_argument("--params", default="1,2", help="dynamics presets, comma separated")
    p_matrix.add_argument("--workers", default="4", help="worker counts, comma separated")
    p_matrix.add_argument("--blocks", default=str(DEFAULT_BLOCK),
                          help="on-demand block sizes, comma separated")
    p_matrix.add_argument("--reps", type=int, default=10)
    p_matrix.add_argument("--iters", type=int, default=DEFAULT_ITERATIONS)
    p_matrix.add_argument("--out-dir", required=True)
    p_matrix.add_argument("--no-series", action="store_true",
                          help="keep timing rows only, skip per-run series files")
    p_matrix.add_argument("--plot", action="store_true", help="render the timing figure")
    p_matrix.set_defaults(func=_cmd_matrix)

    p_cmp = sub.add_parser("compare", help="rank-test focal measures across variants")
    p_cmp.add_argument("--variant", action="append", nargs="+", required=True,
                       metavar=("NAME", "CSV"),
                       help="variant name followed by its series CSV files; repeatable")
    cut = p_cmp.add_mutually_exclusive_group()
    cut.add_argument("--params", type=int, choices=(1, 2), default=1,
                     help="dynamics preset, sets the steady-state cutoff")
    cut.add_argument("--cutoff", type=int, default=None, help="explicit steady-state cutoff")
    p_cmp.add_argument("--out", required=True, metavar="PATH", help="comparison CSV path")
    p_cmp.add_argument("--plot", action="store_true", help="render the p-value figure")
    p_cmp.set_defaults(func=_cmd_compare)

    p_repro = sub.add_parser("check-repro", help="byte-compare repeated runs of one spec")
    _add_model_options(p_repro)
    p_repro.add_argument("--repeats", type=int, default=3)
    p_repro.set_defaults(func=_cmd_check_repro)

    p_plot = sub.add_parser("plot", help="render a figure from an emitted CSV")
    what = p_plot.add_mutually_exclusive_group(required=True)
    what.add_argument("--series", metavar="CSV")
    what.add_argument("--summary", metavar="CSV")
    what.add_argument("--comparison", metavar="CSV")
    p_plot.add_argument("--out", required=True, metavar="PNG")
    p_plot.set_defaults(func=_cmd_plot)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigurationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SimulationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
