"""Evaluation protocol: error metrics, paired MAE-difference intervals, subgroup tables,
four-week binning and the per-window sign test."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Mapping

import numpy as np
from scipy import stats

from gaest.cohort.types import trimester
from gaest.errors import ConfigError, ValidationError
from gaest.growth import in_sga_group
from gaest.rng import make_rng

CI_METHODS = ("normal_z", "student_t")
Z_95 = 1.96


@dataclass(frozen=True)
class StatsConfig:
    ci_method: str = "normal_z"
    bin_width_days: int = 28
    seed: int = 0

    def __post_init__(self):
        if self.ci_method not in CI_METHODS:
            raise ConfigError(f"ci_method must be one of {CI_METHODS}, got {self.ci_method!r}")
        if not self.bin_width_days > 0:
            raise ConfigError("bin_width_days must be > 0")


@dataclass(frozen=True)
class ErrorSummary:
    n: int
    mae: float
    sd_abs: float
    me: float
    sd: float
    sd_defined: bool = True


@dataclass(frozen=True)
class DiffSummary:
    n: int
    mean: float
    sd: float
    ci_lo: float
    ci_hi: float


@dataclass(frozen=True)
class VisitRecord:
    """One evaluable visit: metadata plus every method's GA estimate in days."""

    patient_id: str
    visit_id: str
    ga: int
    country: str
    device: str
    size: str = "unclassifiable"
    estimates: Mapping[str, float] = field(default_factory=dict)


def _sd(values: np.ndarray) -> float:
    return float(np.std(values, ddof=1)) if len(values) > 1 else 0.0


def mae_me(errors) -> ErrorSummary:
    """MAE and ME with sample (n - 1) standard deviations; sd is 0 and flagged when n = 1."""
    err = np.asarray(errors, dtype=np.float64)
    if err.size == 0:
        raise ValidationError("mae_me needs at least one error")
    if not np.all(np.isfinite(err)):
        raise ValidationError("errors must be finite")
    a = np.abs(err)
    return ErrorSummary(len(err), float(a.mean()), _sd(a), float(err.mean()), _sd(err), len(err) > 1)


def _critical(n: int, config: StatsConfig) -> float:
    if config.ci_method == "normal_z":
        return Z_95
    return float(stats.t.ppf(0.975, n - 1))


def ci_from_summary(mean: float, sd: float, n: int, config: StatsConfig = StatsConfig()) -> tuple[float, float]:
    """95% interval mean +/- crit * sd / sqrt(n)."""
    if n < 2:
        raise ValidationError(f"a confidence interval needs n >= 2, got {n}")
    half = _critical(n, config) * sd / math.sqrt(n)
    return mean - half, mean + half


def paired_diff_ci(model_abs_errs, baseline_abs_errs, config: StatsConfig = StatsConfig()) -> DiffSummary:
    a = np.abs(np.asarray(model_abs_errs, dtype=np.float64))
    b = np.abs(np.asarray(baseline_abs_errs, dtype=np.float64))
    if a.shape != b.shape:
        raise ValidationError(f"paired inputs differ in length: {a.size} vs {b.size}")
    if a.size < 2:
        raise ValidationError("paired comparison needs at least 2 pairs")
    d = a - b
    mean, sd = float(d.mean()), _sd(d)
    lo, hi = ci_from_summary(mean, sd, d.size, config)
    return DiffSummary(d.size, mean, sd, lo, hi)


def sign_test_median(diffs) -> float:
    """One-sided sign test, H0: median >= 0 vs H1: median < 0.

    p = P(Binomial(n, 1/2) <= k) with n the nonzero count and k the positives.
    """
    d = np.asarray(diffs, dtype=np.float64)
    d = d[d != 0]
    if d.size == 0:
        raise ValidationError("sign test is undefined when every difference is zero")
    n, k = int(d.size), int(np.sum(d > 0))
    return math.fsum(math.comb(n, i) for i in range(k + 1)) / 2 ** n


# -- selection and subgroups -----------------------------------------------

def select_one_visit_per_patient(records, predicate: Callable, seed: int, label: str = ""):
    """One eligible record per patient, drawn uniformly with a per-patient seeded stream.

    ``records`` may be VisitRecords or ``(patient, visit)`` pairs; the
    returned list follows first-appearance order of patients.
    """
    by_patient: dict[str, list] = {}
    for r in records:
        if predicate(r):
            pid = r.patient_id if hasattr(r, "patient_id") else r[0].patient_id
            by_patient.setdefault(pid, []).append(r)
    chosen = []
    for pid, options in by_patient.items():
        if len(options) == 1:
            chosen.append(options[0])
            continue
        rng = make_rng(seed, "select", label, pid)
        chosen.append(options[int(rng.integers(len(options)))])
    return chosen


SUBGROUP_KINDS = ("trimester", "country", "device", "site", "size", "ga_range")


def matches(record: VisitRecord, criterion) -> bool:
    kind, value = criterion
    if kind == "trimester":
        return trimester(record.ga) in (value if isinstance(value, tuple) else (value,))
    if kind == "country":
        return record.country == value
    if kind == "device":
        return record.device == value
    if kind == "site":
        return (record.country, record.device) == tuple(value)
    if kind == "size":
        if value == "sga":
            return in_sga_group(record.size)
        if value == "sga_or_lga":
            return in_sga_group(record.size) or record.size == "lga"
        if value == "any":
            return True
        return record.size == value
    if kind == "ga_range":
        lo, hi = value
        return lo <= record.ga <= hi
    raise ConfigError(f"unknown subgroup criterion {kind!r}; expected one of {SUBGROUP_KINDS}")


def subgroup_filter(records, criterion) -> list:
    if criterion[0] not in SUBGROUP_KINDS:
        raise ConfigError(f"unknown subgroup criterion {criterion[0]!r}; expected one of {SUBGROUP_KINDS}")
    return [r for r in records if matches(r, criterion)]


def window_bin(records, methods, bin_width_days: int = 28):
    """Per-window MAE of each method: ``[(bin, n, {method: mae})]``; empty windows omitted."""
    if not bin_width_days > 0:
        raise ConfigError("bin_width_days must be > 0")
    bins: dict[int, list] = {}
    for r in records:
        bins.setdefault(math.floor(r.ga / bin_width_days), []).append(r)
    out = []
    for b in sorted(bins):
        rs = bins[b]
        out.append((b, len(rs), {m: float(np.mean([abs(r.estimates[m] - r.ga) for r in rs])) for m in methods}))
    return out


# -- tables ----------------------------------------------------------------

@dataclass(frozen=True)
class MethodRow:
    method: str
    errors: ErrorSummary
    diff: DiffSummary | None  # None for the reference column


@dataclass(frozen=True)
class TableBlock:
    group: str
    n: int
    mean_gt: float
    sd_gt: float
    rows: tuple[MethodRow, ...]


@dataclass(frozen=True)
class Table:
    name: str
    title: str
    reference: str
    diff_label: str
    blocks: tuple[TableBlock, ...]


def _errors_of(records, method):
    missing = [r.visit_id for r in records if method not in r.estimates]
    if missing:
        raise ValidationError(f"no {method!r} estimate for selected visit {missing[0]}")
    return np.array([r.estimates[method] - r.ga for r in records], dtype=np.float64)


def build_block(group: str, records, methods, reference: str, config: StatsConfig,
                reference_first: bool = False) -> TableBlock:
    """Metrics for every method on one selection.

    Differences are ``|method| - |reference|`` per patient, or
    ``|reference| - |method|`` when ``reference_first``.
    """
    gts = np.array([r.ga for r in records], dtype=np.float64)
    ref_err = _errors_of(records, reference)
    rows = []
    for m in methods:
        err = ref_err if m == reference else _errors_of(records, m)
        diff = None
        if m != reference and len(records) >= 2:
            diff = (paired_diff_ci(ref_err, err, config) if reference_first
                    else paired_diff_ci(err, ref_err, config))
        rows.append(MethodRow(m, mae_me(err), diff))
    return TableBlock(group, len(records), float(gts.mean()), _sd(gts), tuple(rows))


def build_table(name: str, title: str, records, groups, methods, reference: str, config: StatsConfig,
                reference_first: bool = False, require=()) -> Table:
    """One block per ``(group_name, criterion)``; visits are re-sampled one per patient per group."""
    blocks = []
    needed = tuple(methods) + tuple(require)
    for group, criterion in groups:
        def eligible(r, criterion=criterion):
            return (criterion is None or matches(r, criterion)) and all(m in r.estimates for m in needed)
        chosen = select_one_visit_per_patient(records, eligible, config.seed, f"{name}/{group}")
        if not chosen:
            continue
        blocks.append(build_block(group, chosen, methods, reference, config, reference_first))
    label = (f"MAE difference compared to {reference}" if reference_first
             else f"MAE difference vs {reference}")
    return Table(name, title, reference, label, tuple(blocks))


def table_to_csv(table: Table, header_text: str = "") -> str:
    cols = ("group,n,mean_gt,sd_gt,method,reference,me,me_sd,mae,mae_sd,diff_mean,diff_sd,ci_lo,ci_hi,"
            "sd_defined\n")
    lines = [header_text, cols]
    for b in table.blocks:
        for r in b.rows:
            e, d = r.errors, r.diff
            dcols = ",,," if d is None else f"{d.mean:.6f},{d.sd:.6f},{d.ci_lo:.6f},{d.ci_hi:.6f}"
            lines.append(
                f"{b.group},{b.n},{b.mean_gt:.6f},{b.sd_gt:.6f},{r.method},{int(r.method == table.reference)},"
                f"{e.me:.6f},{e.sd:.6f},{e.mae:.6f},{e.sd_abs:.6f},{dcols},{int(e.sd_defined)}\n"
            )
    return "".join(lines)


def _pm(a: float, b: float) -> str:
    return f"{a:.2f} ± {b:.2f}"


def table_to_text(table: Table) -> str:
    out = [f"{table.title}\n"]
    for b in table.blocks:
        out.append(f"\n{b.group}  No. patients: {b.n}, Average ground-truth GA ± sd (days): "
                   f"{b.mean_gt:.1f} ± {b.sd_gt:.1f}\n")
        cells = [["Estimation method"] + [r.method for r in b.rows],
                 ["ME ± sd (days)"] + [_pm(r.errors.me, r.errors.sd) for r in b.rows],
                 ["MAE ± sd (days)"] + [_pm(r.errors.mae, r.errors.sd_abs) for r in b.rows],
                 [f"{table.diff_label}, mean ± sd (days)"]
                 + ["Reference" if r.diff is None else _pm(r.diff.mean, r.diff.sd) for r in b.rows],
                 ["95% CI of difference (days)"]
                 + ["Reference" if r.diff is None else f"{r.diff.ci_lo:.1f}, {r.diff.ci_hi:.1f}" for r in b.rows]]
        widths = [max(len(row[i]) for row in cells) for i in range(len(cells[0]))]
        for row in cells:
            out.append("  ".join(c.ljust(w) for c, w in zip(row, widths)).rstrip() + "\n")
    return "".join(out)


# -- size table (model vs baseline per size subgroup) -----------------------

SIZE_GROUPS = (("Overall", ("size", "any")), ("SGA", ("size", "sga")), ("severe SGA", ("size", "severe_sga")),
               ("LGA", ("size", "lga")), ("Normal", ("size", "normal")), ("SGA or LGA", ("size", "sga_or_lga")))


def size_table(records, model: str, baseline: str, config: StatsConfig) -> Table:
    sized = [r for r in records if r.size != "unclassifiable"]
    return build_table("table5", f"{model} vs {baseline} by AC size class", sized, SIZE_GROUPS,
                       (model, baseline), baseline, config)


def size_table_to_csv(table: Table, header_text: str = "") -> str:
    lines = [header_text, "group,model_mae,model_mae_sd,model_me,model_me_sd,baseline_mae,baseline_mae_sd,"
                          "baseline_me,baseline_me_sd,diff_mean,diff_sd,ci_lo,ci_hi,n\n"]
    for b in table.blocks:
        model_row = next(r for r in b.rows if r.method != table.reference)
        base_row = next(r for r in b.rows if r.method == table.reference)
        m, s, d = model_row.errors, base_row.errors, model_row.diff
        dcols = ",,," if d is None else f"{d.mean:.6f},{d.sd:.6f},{d.ci_lo:.6f},{d.ci_hi:.6f}"
        lines.append(f"{b.group},{m.mae:.6f},{m.sd_abs:.6f},{m.me:.6f},{m.sd:.6f},{s.mae:.6f},{s.sd_abs:.6f},"
                     f"{s.me:.6f},{s.sd:.6f},{dcols},{b.n}\n")
    return "".join(lines)


# -- figure series -----------------------------------------------------------

def binned_series_csv(records, methods, bin_width_days: int, header_text: str = "",
                      sign_test_pair: tuple[str, str] | None = None) -> str:
    cols = ["bin", "ga_lo", "ga_hi", "n"] + [f"mae_{m}" for m in methods]
    if sign_test_pair:
        cols.append("sign_test_p")
    lines = [header_text, ",".join(cols) + "\n"]
    by_bin: dict[int, list] = {}
    for r in records:
        by_bin.setdefault(math.floor(r.ga / bin_width_days), []).append(r)
    for b, n, maes in window_bin(records, methods, bin_width_days):
        row = [str(b), str(b * bin_width_days), str((b + 1) * bin_width_days - 1), str(n)]
        row += [f"{maes[m]:.6f}" for m in methods]
        if sign_test_pair:
            a, ref = sign_test_pair
            diffs = [abs(r.estimates[a] - r.ga) - abs(r.estimates[ref] - r.ga) for r in by_bin[b]]
            try:
                row.append(f"{sign_test_median(diffs):.6g}")
            except ValidationError:
                row.append("NA")
        lines.append(",".join(row) + "\n")
    return "".join(lines)
