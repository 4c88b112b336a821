"""Cohort data model: patients, visits, biometry and media references."""

from __future__ import annotations

from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Mapping

from gaest.errors import InvalidVisitError, ValidationError

GA_MIN_DAYS = 42
GA_MAX_DAYS = 315
FIRST_TRIMESTER_END = 98  # first day of trimester 2
THIRD_TRIMESTER_START = 196

COUNTRIES = ("US", "Zambia")
DEVICES = ("GE", "Sonosite")
MEDIA_KINDS = ("image", "video")
ANATOMIES = ("crl", "head", "abdomen", "femur")
SIZE_CLASSES = ("sga", "normal", "lga")
BIOMETRY_FIELDS = ("bpd", "hc", "ac", "fl", "crl")


def ground_truth_ga(visit: "Visit") -> int:
    """GA at the initial exam plus days elapsed since that exam."""
    return _ground_truth(visit.baseline_ga, visit.days_since_baseline)


def _ground_truth(baseline_ga: int, days_since_baseline: int) -> int:
    if days_since_baseline < 0:
        raise InvalidVisitError(f"days_since_baseline must be >= 0, got {days_since_baseline}")
    if baseline_ga <= 0:
        raise InvalidVisitError(f"baseline_ga must be > 0, got {baseline_ga}")
    return baseline_ga + days_since_baseline


def trimester(ga_days: float) -> int:
    if ga_days < FIRST_TRIMESTER_END:
        return 1
    if ga_days < THIRD_TRIMESTER_START:
        return 2
    return 3


@dataclass(frozen=True)
class Biometry:
    """Fetal biometric measurements in cm; absent values are ``None``."""

    bpd: float | None = None
    hc: float | None = None
    ac: float | None = None
    fl: float | None = None
    crl: float | None = None

    def __post_init__(self):
        for name in BIOMETRY_FIELDS:
            value = getattr(self, name)
            if value is not None and not value > 0:
                raise ValidationError(f"biometry {name} must be > 0, got {value}")

    def available(self) -> dict[str, float]:
        return {k: getattr(self, k) for k in BIOMETRY_FIELDS if getattr(self, k) is not None}


@dataclass(frozen=True)
class MediaRef:
    kind: str
    anatomy: str
    path: str
    pixel_spacing: float
    n_frames: int = 1
    seed: int = 0

    def __post_init__(self):
        if self.kind not in MEDIA_KINDS:
            raise ValidationError(f"unknown media kind {self.kind!r}; expected one of {MEDIA_KINDS}")
        if self.anatomy not in ANATOMIES:
            raise ValidationError(f"unknown anatomy {self.anatomy!r}; expected one of {ANATOMIES}")
        if not self.pixel_spacing > 0:
            raise ValidationError(f"pixel_spacing must be > 0, got {self.pixel_spacing}")
        if self.n_frames < 1 or (self.kind == "image" and self.n_frames != 1):
            raise ValidationError(f"invalid frame count {self.n_frames} for {self.kind}")


@dataclass(frozen=True)
class Visit:
    visit_id: str
    days_since_baseline: int
    baseline_ga: int
    biometry: Biometry = field(default_factory=Biometry)
    media: tuple[MediaRef, ...] = ()
    formula_ga_estimates: Mapping[str, float] | None = None
    # latent synthetic-only fields; absent for real data
    size_factor: float | None = None
    size_class: str | None = None

    def __post_init__(self):
        ga = _ground_truth(self.baseline_ga, self.days_since_baseline)
        if not GA_MIN_DAYS <= ga <= GA_MAX_DAYS:
            raise InvalidVisitError(
                f"visit {self.visit_id}: ground-truth GA {ga} outside [{GA_MIN_DAYS}, {GA_MAX_DAYS}]"
            )
        if self.biometry.crl is not None and trimester(ga) != 1:
            raise ValidationError(f"visit {self.visit_id}: crl given outside the first trimester")
        if self.size_class is not None and self.size_class not in SIZE_CLASSES:
            raise ValidationError(f"unknown size class {self.size_class!r}")
        object.__setattr__(self, "media", tuple(self.media))
        if self.formula_ga_estimates is not None:
            object.__setattr__(
                self, "formula_ga_estimates", MappingProxyType(dict(self.formula_ga_estimates))
            )

    @property
    def ga(self) -> int:
        return ground_truth_ga(self)

    def __eq__(self, other):
        if not isinstance(other, Visit):
            return NotImplemented
        return _visit_tuple(self) == _visit_tuple(other)

    def __hash__(self):
        return hash((self.visit_id, self.baseline_ga, self.days_since_baseline))


def _visit_tuple(v: Visit):
    fge = None if v.formula_ga_estimates is None else dict(v.formula_ga_estimates)
    return (v.visit_id, v.days_since_baseline, v.baseline_ga, v.biometry, v.media, fge,
            v.size_factor, v.size_class)


@dataclass(frozen=True)
class Patient:
    patient_id: str
    country: str
    device: str
    visits: tuple[Visit, ...]

    def __post_init__(self):
        object.__setattr__(self, "visits", tuple(self.visits))
        if self.country not in COUNTRIES:
            raise ValidationError(f"unknown country {self.country!r}; expected one of {COUNTRIES}")
        if self.device not in DEVICES:
            raise ValidationError(f"unknown device {self.device!r}; expected one of {DEVICES}")
        if self.device == "Sonosite" and self.country != "Zambia":
            raise ValidationError(f"patient {self.patient_id}: Sonosite devices only occur in Zambia")
        if not self.visits:
            raise ValidationError(f"patient {self.patient_id} has no visits")
        days = [v.days_since_baseline for v in self.visits]
        if days != sorted(days) or len(set(days)) != len(days):
            raise ValidationError(f"patient {self.patient_id}: visits must be strictly ordered by day")
        if days[0] != 0:
            raise ValidationError(f"patient {self.patient_id}: no baseline visit (day 0)")
        if len({v.baseline_ga for v in self.visits}) != 1:
            raise ValidationError(f"patient {self.patient_id}: inconsistent baseline_ga across visits")
        ids = [v.visit_id for v in self.visits]
        if len(set(ids)) != len(ids):
            raise ValidationError(f"patient {self.patient_id}: duplicate visit ids")


@dataclass(frozen=True)
class Cohort:
    patients: tuple[Patient, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "patients", tuple(self.patients))
        seen: set[str] = set()
        for p in self.patients:
            if p.patient_id in seen:
                raise ValidationError(f"duplicate patient_id {p.patient_id!r}")
            seen.add(p.patient_id)

    def __len__(self):
        return len(self.patients)

    def __iter__(self):
        return iter(self.patients)

    def visits(self):
        """Yield ``(patient, visit)`` pairs in manifest order."""
        for p in self.patients:
            for v in p.visits:
                yield p, v

    def subset(self, patient_ids) -> "Cohort":
        keep = set(patient_ids)
        return Cohort(tuple(p for p in self.patients if p.patient_id in keep))

    def find_visit(self, visit_id: str) -> tuple[Patient, Visit]:
        for p, v in self.visits():
            if v.visit_id == visit_id:
                return p, v
        raise KeyError(visit_id)
