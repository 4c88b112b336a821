"""Seeded synthetic cohort generator standing in for a real prospective dataset."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from statistics import NormalDist

import numpy as np

from gaest.cohort.render import reference_biometry, render_image, render_video, frame_dims
from gaest.cohort.types import (
    FIRST_TRIMESTER_END, THIRD_TRIMESTER_START, GA_MIN_DAYS, Biometry, Cohort, MediaRef,
    Patient, Visit,
)
from gaest.errors import ConfigError, EmptyCohortError, ValidationError
from gaest.imaging import read_pgm, write_pgm
from gaest.provenance import header_line, header_json
from gaest.rng import derive_seed, make_rng

TRIMESTER_DAYS = ((GA_MIN_DAYS, FIRST_TRIMESTER_END - 1),
                  (FIRST_TRIMESTER_END, THIRD_TRIMESTER_START - 1),
                  (THIRD_TRIMESTER_START, 300))
DEVICE_SPACING = {"GE": 0.3, "Sonosite": 0.36}
_STD_NORMAL = NormalDist()


@dataclass(frozen=True)
class BiometryNoiseModel:
    """Measurement and formula-error magnitudes, interpolated linearly in GA.

    The baseline ("Hadlock-like") estimate error is drawn as
    ``N(bias[size_class], sd(ga))`` for second/third trimester visits and
    ``N(0, sd(ga))`` in the first trimester, where crown-rump dating is
    unaffected by growth restriction.
    """

    measurement_cv: tuple[float, float] = (0.02, 0.05)
    baseline_sd_days: tuple[float, float] = (1.5, 8.0)
    sga_bias_days: float = -8.0
    normal_bias_days: float = -1.0
    lga_bias_days: float = 2.5

    def _interp(self, pair, ga):
        frac = min(max((ga - GA_MIN_DAYS) / (315 - GA_MIN_DAYS), 0.0), 1.0)
        return pair[0] + (pair[1] - pair[0]) * frac

    def measurement_sd(self, ga: float) -> float:
        return self._interp(self.measurement_cv, ga)

    def baseline_sd(self, ga: float) -> float:
        return self._interp(self.baseline_sd_days, ga)

    def baseline_bias(self, size_class: str) -> float:
        return {"sga": self.sga_bias_days, "normal": self.normal_bias_days,
                "lga": self.lga_bias_days}[size_class]


@dataclass(frozen=True)
class SynthConfig:
    n_patients: int = 400
    trimester_visit_weights: tuple[float, float, float] = (0.093, 0.347, 0.560)
    sga_fraction: float = 0.10
    lga_fraction: float = 0.10
    biometry_noise_model: BiometryNoiseModel = field(default_factory=BiometryNoiseModel)
    rng_seed: int = 0
    visits_per_patient: tuple[int, int] = (1, 3)
    us_fraction: float = 0.42
    zambia_sonosite_fraction: float = 0.70
    size_cv: float = 0.07
    video_frames: tuple[int, int] = (48, 80)

    def __post_init__(self):
        w = self.trimester_visit_weights
        if len(w) != 3 or min(w) < 0 or abs(sum(w) - 1.0) > 1e-9:
            raise ConfigError(f"trimester_visit_weights must be 3 probabilities summing to 1, got {w}")
        for name in ("sga_fraction", "lga_fraction", "us_fraction", "zambia_sonosite_fraction"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ConfigError(f"{name} must be in [0, 1]")
        if self.sga_fraction + self.lga_fraction > 1.0:
            raise ConfigError("sga_fraction + lga_fraction must not exceed 1")
        lo, hi = self.visits_per_patient
        if not 1 <= lo <= hi:
            raise ConfigError("visits_per_patient must satisfy 1 <= lo <= hi")
        if self.n_patients < 0:
            raise ConfigError("n_patients must be >= 0")


def _draw_size(rng, cfg: SynthConfig) -> tuple[str, float]:
    """Latent size class and z-score; classes are the z tails at the configured fractions."""
    fs, fl = cfg.sga_fraction, cfg.lga_fraction
    u = rng.random()
    if u < fs:
        cls, lo, hi = "sga", 0.0, fs
    elif u < fs + fl:
        cls, lo, hi = "lga", 1.0 - fl, 1.0
    else:
        cls, lo, hi = "normal", fs, 1.0 - fl
    p = lo + (hi - lo) * rng.random()
    p = min(max(p, 1e-12), 1.0 - 1e-12)
    return cls, _STD_NORMAL.inv_cdf(p)


def _draw_visit_days(rng, cfg: SynthConfig) -> list[int]:
    lo, hi = cfg.visits_per_patient
    n = int(rng.integers(lo, hi + 1))
    days: set[int] = set()
    while len(days) < n:
        t = int(rng.choice(3, p=cfg.trimester_visit_weights))
        a, b = TRIMESTER_DAYS[t]
        days.add(int(rng.integers(a, b + 1)))
    return sorted(days)


def _media_plan(ga: int) -> tuple[list[str], list[str]]:
    if ga < FIRST_TRIMESTER_END:
        return ["crl", "crl"], ["crl"]
    return ["head", "abdomen", "femur"], ["head", "abdomen"]


def _make_visit(rng, cfg, pid, j, ga, baseline_ga, size_class, z, device, seed):
    noise = cfg.biometry_noise_model
    factor = float(np.exp(cfg.size_cv * z))
    ref = reference_biometry(ga)
    sd = noise.measurement_sd(ga)

    def measure(name, exponent):
        return round(ref[name] * factor ** exponent * (1.0 + sd * rng.standard_normal()), 2)

    if ga < FIRST_TRIMESTER_END:
        bio = Biometry(crl=measure("crl", 0.5))
    else:
        bio = Biometry(bpd=measure("bpd", 0.5), hc=measure("hc", 0.5),
                       ac=measure("ac", 1.0), fl=measure("fl", 0.5))
    bias = noise.baseline_bias(size_class) if ga >= FIRST_TRIMESTER_END else 0.0
    hadlock = max(1.0, round(ga + bias + noise.baseline_sd(ga) * rng.standard_normal(), 1))

    vid = f"{pid}-V{j}"
    spacing = DEVICE_SPACING[device]
    images, videos = _media_plan(ga)
    media = []
    for k, anatomy in enumerate(images):
        media.append(MediaRef("image", anatomy, f"media/{pid}/{vid}/img{k}_{anatomy}.pgm",
                              spacing, 1, derive_seed(seed, vid, "image", k)))
    for k, anatomy in enumerate(videos):
        n_frames = int(rng.integers(cfg.video_frames[0], cfg.video_frames[1] + 1))
        media.append(MediaRef("video", anatomy, f"media/{pid}/{vid}/vid{k}_{anatomy}",
                              spacing, n_frames, derive_seed(seed, vid, "video", k)))
    return Visit(
        visit_id=vid, days_since_baseline=ga - baseline_ga, baseline_ga=baseline_ga,
        biometry=bio, media=tuple(media), formula_ga_estimates={"hadlock": hadlock},
        size_factor=factor, size_class=size_class,
    )


def synthesize_cohort(config: SynthConfig) -> Cohort:
    if config.n_patients == 0:
        raise EmptyCohortError("n_patients must be > 0")
    seed = config.rng_seed
    patients = []
    for i in range(config.n_patients):
        rng = make_rng(seed, "patient", i)
        pid = f"P{i:05d}"
        if rng.random() < config.us_fraction:
            country, device = "US", "GE"
        else:
            country = "Zambia"
            device = "Sonosite" if rng.random() < config.zambia_sonosite_fraction else "GE"
        size_class, z = _draw_size(rng, config)
        gas = _draw_visit_days(rng, config)
        baseline = gas[0]
        visits = [_make_visit(rng, config, pid, j, ga, baseline, size_class, z, device, seed)
                  for j, ga in enumerate(gas)]
        patients.append(Patient(pid, country, device, tuple(visits)))
    return Cohort(tuple(patients))


# -- media -----------------------------------------------------------------

def render_media(visit: Visit, ref: MediaRef) -> np.ndarray:
    """Frames for a synthetic media item: (H, W) for images, (T, H, W) for videos."""
    if visit.size_factor is None:
        raise ValidationError(f"visit {visit.visit_id} carries no latent size factor; cannot render")
    if ref.kind == "image":
        return render_image(visit.ga, visit.size_factor, ref.anatomy, ref.pixel_spacing, ref.seed)
    return render_video(visit.ga, visit.size_factor, ref.anatomy, ref.pixel_spacing, ref.seed, ref.n_frames)


class RenderedMediaStore:
    """Media produced on demand from the latent fields of a synthetic manifest."""

    def load(self, visit: Visit, ref: MediaRef) -> tuple[np.ndarray, float]:
        return render_media(visit, ref), ref.pixel_spacing


class DiskMediaStore:
    """Media read from PGM files (images) and indexed PGM directories (videos)."""

    def __init__(self, root: str | Path):
        self.root = Path(root)

    def load(self, visit: Visit, ref: MediaRef) -> tuple[np.ndarray, float]:
        path = self.root / ref.path
        if ref.kind == "image":
            return read_pgm(path), ref.pixel_spacing
        index = json.loads((path / "index.json").read_text())
        frames = np.stack([read_pgm(path / name) for name in index["frames"]])
        if len(frames) != index["frame_count"]:
            raise ValidationError(f"{path}: index frame_count does not match frames")
        return frames, float(index["pixel_spacing"])


def write_media(cohort: Cohort, root: str | Path, header: dict | None = None) -> int:
    """Render every media item of ``cohort`` under ``root``; returns the number of files written."""
    root = Path(root)
    comment = header_line(header, comment="").strip() if header else ""
    written = 0
    for _, visit in cohort.visits():
        for ref in visit.media:
            frames = render_media(visit, ref)
            path = root / ref.path
            if ref.kind == "image":
                path.parent.mkdir(parents=True, exist_ok=True)
                write_pgm(path, frames, comment)
                written += 1
                continue
            path.mkdir(parents=True, exist_ok=True)
            names = [f"frame_{t:04d}.pgm" for t in range(len(frames))]
            for name, frame in zip(names, frames):
                write_pgm(path / name, frame, comment)
            w, h = frame_dims(ref.pixel_spacing)
            index = {"frames": names, "frame_count": len(names), "pixel_spacing": ref.pixel_spacing,
                     "width": w, "height": h}
            if header is not None:
                index = {"_header": json.loads(header_json(header)), **index}
            (path / "index.json").write_text(json.dumps(index, indent=1) + "\n")
            written += len(names) + 1
    return written
