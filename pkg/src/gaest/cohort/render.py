"""Synthetic ultrasound-like frames for the generated cohort.

Each frame shows one anatomy (abdomen disc, head ring, femur rod or
crown-rump ellipse) whose physical size follows the fetus's latent biometry,
over a tissue background whose echo level rises with gestational age. The
background level is the size-independent maturity cue; the object size carries
the same growth-restriction bias as caliper biometry.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from gaest.cohort.types import GA_MAX_DAYS, GA_MIN_DAYS
from gaest.rng import make_rng

FIELD_OF_VIEW_CM = (19.2, 14.4)  # (width, height)
LEVEL_RANGE = (0.10, 0.70)  # background echo level at GA_MIN_DAYS and GA_MAX_DAYS
SPECKLE_SHAPE = 8.0  # gamma shape of multiplicative speckle (mean 1)
LEVEL_SD = 0.002
GAIN_SD = 0.004


def _growth(ga_days: float, limit: float, rate: float, onset_weeks: float) -> float:
    w = ga_days / 7.0
    return limit * (1.0 - math.exp(-rate * max(w - onset_weeks, 0.05)))


def reference_biometry(ga_days: float) -> dict[str, float]:
    """Median synthetic biometry (cm) at a gestational age."""
    crl = ((max(ga_days, 24.0) - 23.73) / 8.052) ** 2 / 10.0
    return {
        "bpd": _growth(ga_days, 12.5, 0.05, 8.5),
        "hc": _growth(ga_days, 42.0, 0.05, 9.0),
        "ac": _growth(ga_days, 48.0, 0.04, 9.0),
        "fl": _growth(ga_days, 10.0, 0.045, 10.5),
        "crl": max(crl, 0.1),
    }


def maturity_level(ga_days: float) -> float:
    frac = (ga_days - GA_MIN_DAYS) / (GA_MAX_DAYS - GA_MIN_DAYS)
    return LEVEL_RANGE[0] + (LEVEL_RANGE[1] - LEVEL_RANGE[0]) * frac


@dataclass(frozen=True)
class RenderSpec:
    anatomy: str
    ga_days: float
    size_factor: float
    pixel_spacing: float
    level_offset: float = 0.0


def frame_dims(pixel_spacing: float) -> tuple[int, int]:
    """Native (width, height) covering the fixed field of view."""
    return (round(FIELD_OF_VIEW_CM[0] / pixel_spacing), round(FIELD_OF_VIEW_CM[1] / pixel_spacing))


def object_mask(spec: RenderSpec, shift_cm=(0.0, 0.0), angle: float = 0.0, dims=None) -> np.ndarray:
    """Float mask in [0, 1] of the rendered anatomy (1 inside, 0 outside)."""
    w, h = dims or frame_dims(spec.pixel_spacing)
    s = spec.pixel_spacing
    ys = (np.arange(h) - (h - 1) / 2.0) * s - shift_cm[1]
    xs = (np.arange(w) - (w - 1) / 2.0) * s - shift_cm[0]
    yy, xx = np.meshgrid(ys, xs, indexing="ij")
    c, sn = math.cos(angle), math.sin(angle)
    u = c * xx + sn * yy
    v = -sn * xx + c * yy
    bio = reference_biometry(spec.ga_days)
    f = spec.size_factor
    if spec.anatomy == "abdomen":
        r = bio["ac"] * f / (2 * math.pi)
        a, b = r * 1.08, r / 1.08
        rho = np.sqrt((u / a) ** 2 + (v / b) ** 2)
        return (np.abs(rho - 1.0) * r <= 0.2).astype(np.float32)
    if spec.anatomy == "head":
        r = bio["hc"] * f ** 0.5 / (2 * math.pi)
        a, b = r * 1.12, r / 1.12
        rho = np.sqrt((u / a) ** 2 + (v / b) ** 2)
        ring = np.abs(rho - 1.0) * r <= 0.18
        midline = (np.abs(v) <= 0.08) & (np.abs(u) <= 0.7 * a)
        return (ring | midline).astype(np.float32)
    if spec.anatomy == "femur":
        length = bio["fl"] * f ** 0.5
        return ((np.abs(u) <= length / 2) & (np.abs(v) <= 0.18)).astype(np.float32)
    if spec.anatomy == "crl":
        length = bio["crl"] * f ** 0.5
        a, b = length / 2, max(length * 0.22, 0.15)
        return ((u / a) ** 2 + (v / b) ** 2 <= 1.0).astype(np.float32)
    raise ValueError(f"unknown anatomy {spec.anatomy!r}")


_OBJECT_LEVEL = {"abdomen": 0.78, "head": 0.95, "femur": 0.98, "crl": 0.85}


def render_frame(spec: RenderSpec, rng: np.random.Generator, visibility: float = 1.0,
                 shift_cm=(0.0, 0.0), angle: float = 0.0, gain: float = 1.0) -> np.ndarray:
    """One speckled frame as 8-bit-quantized float32 intensities."""
    mask = object_mask(spec, shift_cm, angle)
    bg = maturity_level(spec.ga_days) + spec.level_offset
    obj = _OBJECT_LEVEL[spec.anatomy]
    clean = bg + visibility * (obj - bg) * mask
    speckle = rng.gamma(SPECKLE_SHAPE, 1.0 / SPECKLE_SHAPE, size=mask.shape)
    motion = rng.normal(0.0, 0.12 * (1.0 - visibility), size=mask.shape)
    img = clean * speckle * gain + motion
    return (np.round(np.clip(img, 0.0, 1.0) * 255.0) / 255.0).astype(np.float32)


def _media_spec(visit_ga: int, size_factor: float, anatomy: str, spacing: float, media_seed: int):
    rng = make_rng(media_seed, "render")
    offset = float(rng.normal(0.0, LEVEL_SD))
    return RenderSpec(anatomy, float(visit_ga), size_factor, spacing, offset), rng


def render_image(visit_ga: int, size_factor: float, anatomy: str, spacing: float, media_seed: int) -> np.ndarray:
    spec, rng = _media_spec(visit_ga, size_factor, anatomy, spacing, media_seed)
    gain = 1.0 + rng.normal(0.0, GAIN_SD)
    angle = rng.uniform(0, math.pi)
    shift = tuple(rng.normal(0.0, 0.8, size=2))
    return render_frame(spec, rng, 1.0, shift, angle, gain)


def render_video(visit_ga: int, size_factor: float, anatomy: str, spacing: float, media_seed: int,
                 n_frames: int) -> np.ndarray:
    """Fly-to sweep: the probe settles onto the standard plane as the video progresses."""
    spec, rng = _media_spec(visit_ga, size_factor, anatomy, spacing, media_seed)
    gain = 1.0 + rng.normal(0.0, GAIN_SD)
    angle0 = rng.uniform(0, math.pi)
    start = rng.normal(0.0, 2.5, size=2)
    end = rng.normal(0.0, 0.5, size=2)
    settle = max(1, int(0.6 * n_frames))
    frames = np.empty((n_frames,) + frame_dims(spacing)[::-1], dtype=np.float32)
    for t in range(n_frames):
        a = min(t / settle, 1.0)
        vis = 0.25 + 0.75 * a
        shift = tuple(start + (end - start) * a)
        frames[t] = render_frame(spec, rng, vis, shift, angle0 + 0.4 * (1 - a), gain)
    return frames
