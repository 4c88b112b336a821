from __future__ import annotations

import math

from gaest.cohort.types import Cohort
from gaest.errors import ConfigError, EmptyCohortError
from gaest.rng import make_rng

SPLIT_NAMES = ("train", "tune", "test")


def split_sizes(n: int, ratios=(0.6, 0.2, 0.2)) -> tuple[int, ...]:
    """Floor each share, then hand out leftover patients one per bucket starting with train."""
    if len(ratios) != len(SPLIT_NAMES) or any(r < 0 for r in ratios):
        raise ConfigError(f"expected three non-negative ratios, got {ratios}")
    if not math.isclose(sum(ratios), 1.0, abs_tol=1e-9):
        raise ConfigError(f"split ratios must sum to 1, got {sum(ratios)}")
    sizes = [math.floor(n * r + 1e-9) for r in ratios]
    i = 0
    while sum(sizes) < n:
        sizes[i % len(sizes)] += 1
        i += 1
    return tuple(sizes)


def split_patients(cohort: Cohort, ratios=(0.6, 0.2, 0.2), seed: int = 0) -> dict[str, str]:
    """Assign every patient (never a visit) to train/tune/test."""
    ids = sorted(p.patient_id for p in cohort.patients)
    if not ids:
        raise EmptyCohortError("cannot split an empty cohort")
    sizes = split_sizes(len(ids), ratios)
    order = make_rng(seed, "split").permutation(len(ids))
    assignment = {}
    start = 0
    for name, size in zip(SPLIT_NAMES, sizes):
        for k in order[start:start + size]:
            assignment[ids[k]] = name
        start += size
    return {pid: assignment[pid] for pid in ids}


def write_split_csv(assignment: dict[str, str], path, header_text: str = "") -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(header_text)
        fh.write("patient_id,split\n")
        for pid in sorted(assignment):
            fh.write(f"{pid},{assignment[pid]}\n")


def read_split_csv(path) -> dict[str, str]:
    out = {}
    with open(path, encoding="utf-8") as fh:
        rows = [line.strip() for line in fh if line.strip() and not line.startswith("#")]
    for row in rows[1:]:
        pid, name = row.split(",")
        if name not in SPLIT_NAMES:
            raise ConfigError(f"unknown split {name!r} for patient {pid}")
        out[pid] = name
    return out
