"""Benchmark and validation harness.

Runs single simulations, replication matrices, reproducibility checks, and
cross-variant statistical comparisons; persists everything as CSV. Wall
time covers the worker lifecycle only (setup and file writes excluded),
measured with a monotonic clock. One simulation runs at a time so timings
are not polluted by sibling runs.
"""

from __future__ import annotations

import statistics
from dataclasses import dataclass, field, replace
from pathlib import Path

from .errors import ConfigurationError, SimulationError
from .params import (
    DEFAULT_ITERATIONS,
    DYNAMICS_PRESETS,
    STEADY_STATE_CUTOFF,
    DynamicsParams,
    SizeParams,
    size_preset,
)
from .rng import replication_seed
from .scheduling import DEFAULT_BLOCK, Simulation, StrategyConfig
from .stats import (
    OUTPUTS,
    STATISTICS,
    FocalMeasures,
    OutputSeries,
    focal_measures,
    kruskal_wallis,
    read_series_csv,
    series_csv_text,
    write_series_csv,
)

#: Strategies whose runs must be byte-identical for a fixed (seed, workers).
DETERMINISTIC_STRATEGIES = frozenset({"st", "ex", "er"})


@dataclass(frozen=True)
class RunSpec:
    """Everything needed to execute and label one simulation run."""

    strategy: str
    size: SizeParams
    dynamics: DynamicsParams
    workers: int = 1
    block: int = DEFAULT_BLOCK
    replication: int = 1
    seed: int | None = None  # explicit 128-bit seed overrides the replication
    size_label: str = ""
    params_label: str = ""

    def strategy_config(self) -> StrategyConfig:
        return StrategyConfig(self.strategy, self.workers, block=self.block)

    def global_seed(self) -> int:
        if self.seed is not None:
            return self.seed
        return replication_seed(self.replication)

    def seed_text(self) -> str:
        return f"{self.global_seed():032x}"

    def label(self) -> str:
        bits = [self.strategy, f"size{self.size_label or self.size.width}",
                f"set{self.params_label or '?'}", f"n{self.workers}"]
        if self.strategy == "od":
            bits.append(f"b{self.block}")
        return "_".join(bits)


@dataclass
class BenchResult:
    """One executed run: its spec, timing, seed, and output series."""

    spec: RunSpec
    wall_time: float
    seed: int
    series: OutputSeries
    csv_path: Path | None = None


def preset_spec(
    strategy: str,
    size: int,
    params_set: int,
    workers: int = 1,
    block: int = DEFAULT_BLOCK,
    replication: int = 1,
    iterations: int = DEFAULT_ITERATIONS,
    seed: int | None = None,
) -> RunSpec:
    """RunSpec from the named size and dynamics presets."""
    return RunSpec(
        strategy=strategy,
        size=size_preset(size, iterations=iterations),
        dynamics=DYNAMICS_PRESETS[params_set],
        workers=workers,
        block=block,
        replication=replication,
        seed=seed,
        size_label=str(size),
        params_label=str(params_set),
    )


def warmup() -> None:
    """Compile every kernel path on a dwarf run so timed runs stay clean."""
    tiny = SizeParams(width=8, height=8, initial_prey=10, initial_predators=5, iterations=3)
    dyn = DYNAMICS_PRESETS[1]
    for cfg in (
        StrategyConfig("st", 1),
        StrategyConfig("ex", 2),
        StrategyConfig("od", 2, block=16),
    ):
        Simulation(tiny, dyn, cfg, replication_seed(1)).run()


def run_single(spec: RunSpec, out: str | Path | None = None, record_tape: bool = False):
    """Execute one run; optionally write its series CSV.

    Returns the BenchResult, plus the Simulation when the draw tape was
    requested (the tape lives in its world).
    """
    sim = Simulation(
        spec.size, spec.dynamics, spec.strategy_config(), spec.global_seed(),
        record_tape=record_tape,
    )
    result = sim.run()
    bench = BenchResult(
        spec=spec, wall_time=result.wall_time, seed=result.global_seed, series=result.series
    )
    if out is not None:
        out = Path(out)
        out.parent.mkdir(parents=True, exist_ok=True)
        write_series_csv(result.series, out)
        bench.csv_path = out
    if record_tape:
        return bench, sim
    return bench


RUNS_HEADER = ("variant", "size", "params", "workers", "block", "rep", "seed", "time_s")
SUMMARY_HEADER = ("variant", "size", "params", "workers", "block", "runs", "mean_time_s", "rsd_pct", "status")


@dataclass
class MatrixResult:
    """Per-run rows plus per-cell aggregates of a replication matrix."""

    run_rows: list[tuple] = field(default_factory=list)
    summary_rows: list[tuple] = field(default_factory=list)
    series_paths: dict[str, list[Path]] = field(default_factory=dict)
    failures: int = 0

    @property
    def ok(self) -> bool:
        return self.failures == 0


def run_matrix(
    specs: list[RunSpec],
    replications: int,
    out_dir: str | Path,
    write_series: bool = True,
) -> MatrixResult:
    """Run every spec for replications 1..R, each replication deriving its
    seed from its number, and write per-run plus per-cell summary CSVs.

    A failed run marks its cell and the matrix keeps going.
    """
    if replications < 1:
        raise ConfigurationError("replication count must be >= 1")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    warmup()
    result = MatrixResult()
    for spec in specs:
        times = []
        cell_failures = 0
        for rep in range(1, replications + 1):
            run_spec = replace(spec, replication=rep, seed=None)
            label = run_spec.label()
            try:
                path = out_dir / f"{label}_rep{rep}.csv" if write_series else None
                bench = run_single(run_spec, out=path)
            except (ConfigurationError, SimulationError) as exc:
                cell_failures += 1
                result.run_rows.append(
                    (spec.strategy, spec.size_label, spec.params_label, spec.workers,
                     spec.block, rep, run_spec.seed_text(), f"failed: {exc}")
                )
                continue
            times.append(bench.wall_time)
            result.run_rows.append(
                (spec.strategy, spec.size_label, spec.params_label, spec.workers,
                 spec.block, rep, run_spec.seed_text(), f"{bench.wall_time:.4f}")
            )
            if bench.csv_path is not None:
                result.series_paths.setdefault(label, []).append(bench.csv_path)
        if times:
            mean_t = statistics.fmean(times)
            rsd = f"{100.0 * statistics.stdev(times) / mean_t:.2f}" if len(times) > 1 else ""
            status = "ok" if cell_failures == 0 else f"failed:{cell_failures}"
            result.summary_rows.append(
                (spec.strategy, spec.size_label, spec.params_label, spec.workers,
                 spec.block, len(times), f"{mean_t:.4f}", rsd, status)
            )
        else:
            result.summary_rows.append(
                (spec.strategy, spec.size_label, spec.params_label, spec.workers,
                 spec.block, 0, "", "", f"failed:{cell_failures}")
            )
        result.failures += cell_failures
    _write_rows(out_dir / "runs.csv", RUNS_HEADER, result.run_rows)
    _write_rows(out_dir / "summary.csv", SUMMARY_HEADER, result.summary_rows)
    return result


def _write_rows(path: Path, header, rows) -> None:
    import csv

    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)


def speedup(t_reference: float, t_parallel: float) -> float:
    """Single-threaded time over parallel time."""
    if t_parallel <= 0:
        raise ValueError("parallel time must be positive")
    return t_reference / t_parallel


COMPARISON_HEADER = ("output", "statistic", "p_value", "flag")


def compare_focal_samples(samples: dict[str, list[FocalMeasures]]) -> list[tuple]:
    """Rank-test every focal measure across variants.

    Returns (output, statistic, p_value, flag) rows, flag "*" below 0.05
    and "**" below 0.01.
    """
    if len(samples) < 2:
        raise ValueError("need at least two variants to compare")
    for name, fms in samples.items():
        if len(fms) < 2:
            raise ValueError(f"variant {name!r} needs at least two replications")
    rows = []
    for out in OUTPUTS:
        for stat in STATISTICS:
            groups = [[fm[(out, stat)] for fm in fms] for fms in samples.values()]
            _, p = kruskal_wallis(groups)
            flag = "**" if p < 0.01 else "*" if p < 0.05 else ""
            rows.append((out, stat, f"{p:.6g}", flag))
    return rows


def compare_series_files(
    variants: dict[str, list[str | Path]], cutoff: int, out: str | Path | None = None
) -> list[tuple]:
    """Compare variants given per-variant series CSV paths (ours or external)."""
    samples: dict[str, list[FocalMeasures]] = {}
    shape = None
    for name, paths in variants.items():
        fms = []
        for p in paths:
            matrix = read_series_csv(p)
            if shape is None:
                shape = matrix.shape
            elif matrix.shape != shape:
                raise ValueError(
                    f"{p}: series shape {matrix.shape} differs from {shape}; "
                    "all compared runs must cover the same iterations"
                )
            fms.append(focal_measures(matrix, cutoff))
        samples[name] = fms
    rows = compare_focal_samples(samples)
    if out is not None:
        _write_rows(Path(out), COMPARISON_HEADER, rows)
    return rows


def cutoff_for_params(params_set: int) -> int:
    return STEADY_STATE_CUTOFF[params_set]


@dataclass
class ReproReport:
    """Outcome of repeated identical runs of one spec."""

    spec: RunSpec
    repeats: int
    identical: bool
    guaranteed: bool

    @property
    def passed(self) -> bool:
        # only guaranteed strategies can fail; the rest are report-only
        return self.identical or not self.guaranteed

    def verdict(self) -> str:
        if self.guaranteed:
            return "PASS" if self.identical else "FAIL"
        return "identical (not guaranteed)" if self.identical else "differs (not guaranteed)"


def check_reproducibility(spec: RunSpec, repeats: int = 3) -> ReproReport:
    """Run a spec repeatedly with one seed and byte-compare the series CSVs."""
    if repeats < 2:
        raise ConfigurationError("need at least two repeats")
    blobs = []
    for _ in range(repeats):
        bench = run_single(spec)
        blobs.append(series_csv_text(bench.series).encode())
    identical = all(b == blobs[0] for b in blobs[1:])
    return ReproReport(
        spec=spec,
        repeats=repeats,
        identical=identical,
        guaranteed=spec.strategy in DETERMINISTIC_STRATEGIES,
    )


