"""Per-population, per-week abdominal-circumference percentiles and SGA/LGA classification."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from gaest.errors import ConfigError, ValidationError

SIZE_LABELS = ("severe_sga", "sga", "normal", "lga", "unclassifiable")


@dataclass(frozen=True)
class GrowthConfig:
    severe_sga_q: float = 0.03
    sga_q: float = 0.10
    lga_q: float = 0.90
    week_range: tuple[int, int] = (14, 36)
    min_studies_per_week: int = 14

    def __post_init__(self):
        if not 0 < self.severe_sga_q < self.sga_q < self.lga_q < 1:
            raise ConfigError("percentile thresholds must satisfy 0 < severe < sga < lga < 1")
        if self.week_range[0] > self.week_range[1]:
            raise ConfigError(f"week_range must be ordered, got {self.week_range}")
        if self.min_studies_per_week < 1:
            raise ConfigError("min_studies_per_week must be >= 1")


@dataclass(frozen=True)
class PercentileCell:
    n: int
    p3: float
    p10: float
    p90: float


@dataclass(frozen=True)
class PercentileTable:
    cells: dict = field(default_factory=dict)  # (population, week) -> PercentileCell

    def get(self, population: str, week: int) -> PercentileCell | None:
        return self.cells.get((population, week))

    def to_csv(self, header_text: str = "") -> str:
        lines = [header_text, "population,week,n,p3,p10,p90\n"]
        for (pop, week), c in sorted(self.cells.items()):
            lines.append(f"{pop},{week},{c.n},{c.p3!r},{c.p10!r},{c.p90!r}\n")
        return "".join(lines)


def percentile(values, q: float) -> float:
    """Linear interpolation between order statistics at 1-indexed rank (n - 1) * q + 1."""
    arr = np.asarray(values, dtype=np.float64)
    if arr.size == 0:
        raise ValidationError("percentile of an empty sample")
    if not 0.0 <= q <= 1.0:
        raise ValidationError(f"q must be in [0, 1], got {q}")
    return float(np.quantile(arr, q, method="linear"))


def gestational_week(ga_days: float) -> int:
    return math.floor(ga_days / 7)


def build_percentile_table(samples, config: GrowthConfig = GrowthConfig()) -> PercentileTable:
    """Percentiles from a cohort or from an iterable of (population, ga_days, ac_cm)."""
    if hasattr(samples, "visits"):
        samples = cohort_ac_samples(samples)
    groups: dict[tuple[str, int], list[float]] = {}
    lo, hi = config.week_range
    for population, ga, ac in samples:
        week = gestational_week(ga)
        if lo <= week <= hi:
            groups.setdefault((population, week), []).append(ac)
    cells = {}
    for key, acs in sorted(groups.items()):
        if len(acs) < config.min_studies_per_week:
            continue
        p3, p10, p90 = (percentile(acs, q) for q in (config.severe_sga_q, config.sga_q, config.lga_q))
        cells[key] = PercentileCell(len(acs), p3, p10, p90)
    if not cells:
        raise ValidationError(
            f"no (population, week) cell in weeks {lo}-{hi} has {config.min_studies_per_week}+ samples"
        )
    return PercentileTable(cells)


def cohort_ac_samples(cohort):
    """(population, ga_days, ac) for every visit with an AC measurement."""
    return [(p.country, v.ga, v.biometry.ac) for p, v in cohort.visits() if v.biometry.ac is not None]


def classify_size(ac: float, ga_days: float, population: str, table: PercentileTable) -> str:
    if not ac > 0:
        raise ValidationError(f"ac must be > 0, got {ac}")
    cell = table.get(population, gestational_week(ga_days))
    if cell is None:
        return "unclassifiable"
    if ac < cell.p3:
        return "severe_sga"
    if ac < cell.p10:
        return "sga"
    if ac > cell.p90:
        return "lga"
    return "normal"


def in_sga_group(label: str) -> bool:
    return label in ("severe_sga", "sga")
