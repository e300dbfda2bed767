"""Output collection, focal measures, and the distributional-equivalence test.

Each iteration yields one record of six observables: prey count, predator
count, cells with food available, mean prey energy, mean predator energy,
and mean food countdown. Counts and energy sums accumulate as integers so
worker merge order cannot perturb the result; means are formed once at
finalization, with a zero population reported as mean 0.

A series of records condenses into 36 focal measures (six summaries of
each observable); samples of focal measures from different run variants
are then compared with the Kruskal-Wallis rank test, whose p-value comes
from the chi-square survival function implemented here via the regularized
incomplete gamma function.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

#: Observable names, in record and CSV column order.
OUTPUTS = (
    "sheep",
    "wolves",
    "grass",
    "mean_energy_sheep",
    "mean_energy_wolves",
    "mean_countdown",
)

#: Summary statistic names, in table order.
STATISTICS = ("max", "argmax", "min", "argmin", "ss_mean", "ss_std")

CSV_HEADER = ("iter",) + OUTPUTS


def _six(x: float) -> float:
    """Normalize a mean through its 6-decimal CSV representation.

    Focal measures are computed from these normalized values so that a
    written-then-ingested series yields bit-identical results.
    """
    return float(f"{x:.6f}")


@dataclass(frozen=True)
class OutputRecord:
    """One iteration's observation of the whole grid."""

    prey: int
    predators: int
    available: int
    prey_energy_sum: int
    predator_energy_sum: int
    countdown_sum: int
    cells: int

    @classmethod
    def from_sums(cls, sums, cells: int) -> "OutputRecord":
        return cls(
            prey=int(sums[0]),
            predators=int(sums[1]),
            available=int(sums[2]),
            prey_energy_sum=int(sums[3]),
            predator_energy_sum=int(sums[4]),
            countdown_sum=int(sums[5]),
            cells=cells,
        )

    @property
    def mean_prey_energy(self) -> float:
        return self.prey_energy_sum / self.prey if self.prey else 0.0

    @property
    def mean_predator_energy(self) -> float:
        return self.predator_energy_sum / self.predators if self.predators else 0.0

    @property
    def mean_countdown(self) -> float:
        return self.countdown_sum / self.cells

    def values(self) -> tuple[float, ...]:
        """The six observables, means normalized to CSV precision."""
        return (
            float(self.prey),
            float(self.predators),
            float(self.available),
            _six(self.mean_prey_energy),
            _six(self.mean_predator_energy),
            _six(self.mean_countdown),
        )


@dataclass(frozen=True)
class OutputSeries:
    """Per-iteration records for iterations 0..m inclusive."""

    records: tuple[OutputRecord, ...]

    @property
    def iterations(self) -> int:
        return len(self.records) - 1

    def column(self, output: str) -> np.ndarray:
        idx = OUTPUTS.index(output)
        return np.array([r.values()[idx] for r in self.records], dtype=np.float64)

    def columns(self) -> np.ndarray:
        """(m+1, 6) matrix of observables."""
        return np.array([r.values() for r in self.records], dtype=np.float64)


def series_csv_text(series: OutputSeries) -> str:
    """The canonical series CSV: counts as integers, means with six decimal
    places, one row per iteration starting at zero."""
    lines = [",".join(CSV_HEADER)]
    for i, rec in enumerate(series.records):
        lines.append(
            f"{i},{rec.prey},{rec.predators},{rec.available},"
            f"{rec.mean_prey_energy:.6f},{rec.mean_predator_energy:.6f},"
            f"{rec.mean_countdown:.6f}"
        )
    return "\n".join(lines) + "\n"


def write_series_csv(series: OutputSeries, path: str | Path) -> None:
    """Write the canonical series CSV to a file."""
    with open(path, "w", newline="") as fh:
        fh.write(series_csv_text(series))


def read_series_csv(path: str | Path) -> np.ndarray:
    """Read a series CSV (ours or third-party) into an (m+1, 6) matrix.

    Rows must be complete and start at iteration 0; means are taken at
    face value so external implementations can be compared.
    """
    rows = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if tuple(h.strip() for h in header) != CSV_HEADER:
            raise ValueError(f"{path}: unexpected header {header!r}")
        for expect, row in enumerate(reader):
            if len(row) != 7:
                raise ValueError(f"{path}: malformed row {row!r}")
            if int(row[0]) != expect:
                raise ValueError(f"{path}: iterations not contiguous at {row[0]}")
            rows.append([float(v) for v in row[1:]])
    if not rows:
        raise ValueError(f"{path}: empty series")
    return np.array(rows, dtype=np.float64)


@dataclass(frozen=True)
class FocalMeasures:
    """The 36 summaries of one run: six statistics of six observables."""

    values: dict[tuple[str, str], float]
    cutoff: int

    @classmethod
    def keys(cls) -> list[tuple[str, str]]:
        return [(out, stat) for out in OUTPUTS for stat in STATISTICS]

    def __getitem__(self, key: tuple[str, str]) -> float:
        return self.values[key]


def summarize_column(x: np.ndarray, cutoff: int) -> dict[str, float]:
    """Six summaries of one observable series.

    Extremes scan all iterations, ties resolving to the earliest; the
    steady-state mean and sample standard deviation cover iterations
    cutoff+1 .. m.
    """
    m = len(x) - 1
    if cutoff >= m:
        raise ValueError(f"steady-state cutoff {cutoff} must be below the last iteration {m}")
    imax = int(np.argmax(x))  # argmax returns the first occurrence
    imin = int(np.argmin(x))
    tail = x[cutoff + 1 :]
    ss_mean = float(tail.mean())
    ss_std = float(tail.std(ddof=1)) if len(tail) > 1 else 0.0
    return {
        "max": float(x[imax]),
        "argmax": float(imax),
        "min": float(x[imin]),
        "argmin": float(imin),
        "ss_mean": ss_mean,
        "ss_std": ss_std,
    }


def focal_measures(series: OutputSeries | np.ndarray, cutoff: int) -> FocalMeasures:
    """All 36 focal measures of one series (or raw (m+1, 6) matrix)."""
    matrix = series.columns() if isinstance(series, OutputSeries) else np.asarray(series)
    values: dict[tuple[str, str], float] = {}
    for j, out in enumerate(OUTPUTS):
        for stat, v in summarize_column(matrix[:, j], cutoff).items():
            values[(out, stat)] = v
    return FocalMeasures(values=values, cutoff=cutoff)


# -- rank test ---------------------------------------------------------------


def _midranks(pooled: np.ndarray) -> tuple[np.ndarray, float]:
    """Mid-ranks of the pooled sample and the tie-correction divisor."""
    order = np.argsort(pooled, kind="mergesort")
    ranks = np.empty(len(pooled), dtype=np.float64)
    tie_sum = 0.0
    i = 0
    n = len(pooled)
    while i < n:
        j = i
        while j + 1 < n and pooled[order[j + 1]] == pooled[order[i]]:
            j += 1
        # positions i..j share one value; assign their average rank
        avg = 0.5 * (i + j) + 1.0
        for k in range(i, j + 1):
            ranks[order[k]] = avg
        t = j - i + 1
        tie_sum += t**3 - t
        i = j + 1
    correction = 1.0 - tie_sum / (n**3 - n) if n > 1 else 0.0
    return ranks, correction


def kruskal_wallis(groups: list[np.ndarray] | list[list[float]]) -> tuple[float, float]:
    """Kruskal-Wallis H and its chi-square p-value across k groups.

    Ties take mid-ranks with the standard correction; a completely tied
    pool degenerates to H = 0, p = 1.
    """
    if len(groups) < 2:
        raise ValueError("need at least two groups")
    arrays = [np.asarray(g, dtype=np.float64) for g in groups]
    if any(len(a) == 0 for a in arrays):
        raise ValueError("groups must be non-empty")
    pooled = np.concatenate(arrays)
    n = len(pooled)
    ranks, correction = _midranks(pooled)
    h = 0.0
    start = 0
    for a in arrays:
        r = ranks[start : start + len(a)]
        h += r.sum() ** 2 / len(a)
        start += len(a)
    h = 12.0 / (n * (n + 1)) * h - 3.0 * (n + 1)
    if correction <= 0.0:
        return 0.0, 1.0  # every observation identical
    h /= correction
    if h < 0.0:
        h = 0.0  # guard against rounding just below zero
    return h, chi_square_sf(h, len(arrays) - 1)


# -- chi-square survival via the regularized incomplete gamma ----------------

_MAX_ITER = 400
_EPS = 1e-16
_TINY = 1e-300


def _lower_gamma_series(a: float, x: float) -> float:
    """Regularized lower incomplete gamma P(a, x) by series; for x < a + 1."""
    term = 1.0 / a
    total = term
    denom = a
    for _ in range(_MAX_ITER):
        denom += 1.0
        term *= x / denom
        total += term
        if abs(term) < abs(total) * _EPS:
            break
    return total * math.exp(-x + a * math.log(x) - math.lgamma(a))

def _upper_gamma_cf(a: float, x: float) -> float:
    """Regularized upper incomplete gamma Q(a, x) by continued fraction
    (modified Lentz); for x >= a + 1."""
    b = x + 1.0 - a
    c = 1.0 / _TINY
    d = 1.0 / b
    f = d
    for i in range(1, _MAX_ITER + 1):
        an = -i * (i - a)
        b += 2.0
        d = an * d + b
        if abs(d) < _TINY:
            d = _TINY
        c = b + an / c
        if abs(c) < _TINY:
            c = _TINY
        d = 1.0 / d
        delta = d * c
        f *= delta
        if abs(delta - 1.0) < _EPS:
            break
    return f * math.exp(-x + a * math.log(x) - math.lgamma(a))


def regularized_upper_gamma(a: float, x: float) -> float:
    """Q(a, x) = Γ(a, x) / Γ(a) for a > 0, x >= 0."""
    if a <= 0.0:
        raise ValueError("shape parameter must be positive")
    if x < 0.0:
        raise ValueError("x must be non-negative")
    if x == 0.0:
        return 1.0
    if x < a + 1.0:
        return 1.0 - _lower_gamma_series(a, x)
    return _upper_gamma_cf(a, x)


def chi_square_sf(x: float, df: int) -> float:
    """P(X >= x) for a chi-square variable with ``df`` degrees of freedom."""
    if df < 1:
        raise ValueError("degrees of freedom must be >= 1")
    if x <= 0.0:
        return 1.0
    return regularized_upper_gamma(df / 2.0, x / 2.0)
