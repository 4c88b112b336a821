"""JSON-lines manifest: one patient record per line, visits embedded."""

from __future__ import annotations

import json
from pathlib import Path

from gaest.cohort.types import Biometry, Cohort, MediaRef, Patient, Visit, BIOMETRY_FIELDS
from gaest.errors import GAError, ManifestParseError, ValidationError
from gaest.provenance import header_json

HEADER_KEY = "_header"


def _media_to_dict(m: MediaRef) -> dict:
    return {"kind": m.kind, "anatomy": m.anatomy, "path": m.path,
            "pixel_spacing": m.pixel_spacing, "n_frames": m.n_frames, "seed": m.seed}


def _visit_to_dict(v: Visit) -> dict:
    d = {
        "visit_id": v.visit_id,
        "days_since_baseline": v.days_since_baseline,
        "baseline_ga": v.baseline_ga,
        "biometry": v.biometry.available(),
        "media": [_media_to_dict(m) for m in v.media],
        "formula_ga_estimates": None if v.formula_ga_estimates is None else dict(v.formula_ga_estimates),
    }
    if v.size_factor is not None:
        d["size_factor"] = v.size_factor
    if v.size_class is not None:
        d["size_class"] = v.size_class
    return d


def patient_to_dict(p: Patient) -> dict:
    return {"patient_id": p.patient_id, "country": p.country, "device": p.device,
            "visits": [_visit_to_dict(v) for v in p.visits]}


def patient_from_dict(d: dict) -> Patient:
    visits = []
    for vd in d["visits"]:
        bio = vd.get("biometry") or {}
        unknown = set(bio) - set(BIOMETRY_FIELDS)
        if unknown:
            raise ValidationError(f"unknown biometry fields {sorted(unknown)}")
        visits.append(Visit(
            visit_id=vd["visit_id"],
            days_since_baseline=int(vd["days_since_baseline"]),
            baseline_ga=int(vd["baseline_ga"]),
            biometry=Biometry(**bio),
            media=tuple(MediaRef(**m) for m in vd.get("media", [])),
            formula_ga_estimates=vd.get("formula_ga_estimates"),
            size_factor=vd.get("size_factor"),
            size_class=vd.get("size_class"),
        ))
    return Patient(d["patient_id"], d["country"], d["device"], tuple(visits))


def dumps_manifest(cohort: Cohort, header: dict | None = None) -> str:
    lines = []
    if header is not None:
        lines.append(json.dumps({HEADER_KEY: json.loads(header_json(header))}, separators=(",", ":")))
    for p in cohort.patients:
        lines.append(json.dumps(patient_to_dict(p), separators=(",", ":")))
    return "".join(line + "\n" for line in lines)


def save_manifest(cohort: Cohort, path: str | Path, header: dict | None = None) -> None:
    Path(path).write_text(dumps_manifest(cohort, header), encoding="utf-8")


def loads_manifest(text: str) -> Cohort:
    patients = []
    seen: dict[str, int] = {}
    for line_no, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            record = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ManifestParseError(line_no, f"malformed JSON ({exc.msg})") from None
        if not isinstance(record, dict):
            raise ManifestParseError(line_no, "record is not a JSON object")
        if HEADER_KEY in record:
            continue
        try:
            patient = patient_from_dict(record)
        except (KeyError, TypeError) as exc:
            raise ManifestParseError(line_no, f"missing or mistyped field: {exc}") from None
        except GAError as exc:
            raise ValidationError(f"line {line_no}: {exc}") from None
        if patient.patient_id in seen:
            raise ValidationError(
                f"line {line_no}: duplicate patient_id {patient.patient_id!r} (first on line {seen[patient.patient_id]})"
            )
        seen[patient.patient_id] = line_no
        patients.append(patient)
    return Cohort(tuple(patients))


def load_manifest(path: str | Path) -> Cohort:
    return loads_manifest(Path(path).read_text(encoding="utf-8"))


def read_manifest_header(path: str | Path) -> dict | None:
    with open(path, encoding="utf-8") as fh:
        first = fh.readline()
    try:
        record = json.loads(first)
    except json.JSONDecodeError:
        return None
    return record.get(HEADER_KEY) if isinstance(record, dict) else None
