"""Inverse-variance case aggregation, cross-model ensembling and confidence ranking."""

from __future__ import annotations

import math
from dataclasses import dataclass

from gaest.errors import ValidationError


@dataclass(frozen=True)
class Estimate:
    mean: float
    variance: float
    source: str = ""

    def __post_init__(self):
        if not math.isfinite(self.mean):
            raise ValidationError(f"estimate mean must be finite, got {self.mean}")
        if not self.variance > 0:
            raise ValidationError(f"estimate variance must be > 0, got {self.variance}")


@dataclass(frozen=True)
class CaseEstimate:
    mean: float
    variance: float
    n_inputs: int
    model_id: str = ""


def inverse_variance_aggregate(estimates, model_id: str = "") -> CaseEstimate:
    """Precision-weighted mean; variance is 1 / sum(1 / variance_i)."""
    estimates = list(estimates)
    if not estimates:
        raise ValidationError("cannot aggregate an empty list of estimates")
    for e in estimates:
        if not e.variance > 0:
            raise ValidationError(f"variance must be > 0, got {e.variance} from {e.source!r}")
    if len(estimates) == 1:
        e = estimates[0]
        return CaseEstimate(e.mean, e.variance, 1, model_id)
    weights = [1.0 / e.variance for e in estimates]
    total = math.fsum(weights)
    mean = math.fsum(w * e.mean for w, e in zip(weights, estimates)) / total
    lo = min(e.mean for e in estimates)
    hi = max(e.mean for e in estimates)
    return CaseEstimate(min(max(mean, lo), hi), 1.0 / total, len(estimates), model_id)


def ensemble_cases(case_estimates, model_id: str = "ensemble") -> CaseEstimate:
    """Unweighted average of per-model case means; variance is mean(variance_i) / n."""
    cases = list(case_estimates)
    if not cases:
        raise ValidationError("cannot ensemble an empty list of case estimates")
    n = len(cases)
    if n == 1:
        c = cases[0]
        return CaseEstimate(c.mean, c.variance, c.n_inputs, model_id)
    mean = math.fsum(c.mean for c in cases) / n
    variance = math.fsum(c.variance for c in cases) / n / n
    return CaseEstimate(mean, variance, sum(c.n_inputs for c in cases), model_id)


def rank_by_confidence(estimates) -> list[Estimate]:
    """Most confident (smallest variance) first; equal variances keep input order."""
    return sorted(estimates, key=lambda e: e.variance)


CASE_CSV_COLUMNS = ("patient_id", "visit_id", "model_id", "mean_days", "variance", "n_inputs")


def case_rows_to_csv(rows, header_text: str = "") -> str:
    """``rows``: iterable of (patient_id, visit_id, CaseEstimate)."""
    out = [header_text, ",".join(CASE_CSV_COLUMNS) + "\n"]
    for pid, vid, c in rows:
        out.append(f"{pid},{vid},{c.model_id},{c.mean!r},{c.variance!r},{c.n_inputs}\n")
    return "".join(out)


def read_case_csv(path) -> list[tuple[str, str, CaseEstimate]]:
    rows = []
    with open(path, encoding="utf-8") as fh:
        lines = [line.rstrip("\n") for line in fh if line.strip() and not line.startswith("#")]
    if not lines or tuple(lines[0].split(",")) != CASE_CSV_COLUMNS:
        raise ValidationError(f"{path}: expected columns {','.join(CASE_CSV_COLUMNS)}")
    for line in lines[1:]:
        pid, vid, model_id, mean, var, n = line.split(",")
        rows.append((pid, vid, CaseEstimate(float(mean), float(var), int(n), model_id)))
    return rows
