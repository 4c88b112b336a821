"""Glue between cohort media, preprocessing, training and case-level prediction."""

from __future__ import annotations

import logging
from dataclasses import dataclass, replace

import numpy as np

from gaest.aggregation import CaseEstimate, ensemble_cases, inverse_variance_aggregate
from gaest.errors import ConfigError, ValidationError
from gaest.estimator.networks import HeteroscedasticNet, ImageNet, VideoNet
from gaest.estimator.optim import ImageExpDecay, VideoLinear
from gaest.estimator.predict import PreprocessedMedia, predict_media
from gaest.estimator.train import TrainConfig, train
from gaest.imaging import AugmentConfig, ClipConfig, resample_array, temporal_subsample
from gaest.rng import derive_seed

log = logging.getLogger(__name__)

MODEL_IDS = ("image", "video_a", "video_b")
MODEL_KIND = {"image": "image", "video_a": "video", "video_b": "video"}
ENSEMBLES = {"video": ("video_a", "video_b"), "ensemble": ("image", "video_a", "video_b")}
STORE_DTYPE = np.float16


@dataclass(frozen=True)
class Preset:
    name: str
    clip: ClipConfig
    image: TrainConfig
    video: TrainConfig
    models: tuple[str, ...] = MODEL_IDS

    def train_config(self, model_id: str) -> TrainConfig:
        return self.image if MODEL_KIND[model_id] == "image" else self.video


_PAPER_IMAGE = TrainConfig(max_steps=100000, schedule=ImageExpDecay(), keep_prob=0.985,
                           augment=AugmentConfig())
_PAPER_VIDEO = TrainConfig(max_steps=100000, schedule=VideoLinear(), keep_prob=0.8,
                           augment=AugmentConfig())
# photometric jitter and zero-filled rotation corners corrupt the echo-level maturity
# cue of the synthetic media at desk scale
_DESK_AUGMENT = AugmentConfig(hflip=True, crop=True, crop_min_fraction=0.9, max_rotation_deg=0.0,
                              saturation_range=(1.0, 1.0), max_brightness_delta=0.0,
                              contrast_range=(1.0, 1.0), max_hue_delta=0.0)
_DESK_VIDEO_AUGMENT = replace(_DESK_AUGMENT, crop=False)
_DESK_CLIP = ClipConfig(video_dims=(48, 36), video_spacing=0.4, image_dims=(64, 48), image_spacing=0.3)

PRESETS = {
    "paper-image": Preset("paper-image", ClipConfig(), _PAPER_IMAGE, _PAPER_VIDEO, ("image",)),
    "paper-video": Preset("paper-video", ClipConfig(), _PAPER_IMAGE, _PAPER_VIDEO, ("video_a", "video_b")),
    "desk": Preset(
        "desk", _DESK_CLIP,
        TrainConfig(max_steps=2000, schedule=ImageExpDecay(lr0=4.56e-4), keep_prob=0.985,
                    augment=_DESK_AUGMENT),
        # video lr0 is 2x the paper-video preset rate; 10x oscillates in the toy clip model
        TrainConfig(max_steps=2000, schedule=VideoLinear(lr0=9.16e-4, lr_final=9.16e-7, total_steps=2000),
                    keep_prob=0.8, augment=_DESK_VIDEO_AUGMENT),
    ),
}


def get_preset(name: str, max_steps: int | None = None) -> Preset:
    if name not in PRESETS:
        raise ConfigError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}")
    preset = PRESETS[name]
    if max_steps is not None:
        preset = replace(preset, image=replace(preset.image, max_steps=max_steps),
                         video=replace(preset.video, max_steps=max_steps))
    return preset


def media_id(visit, ref) -> str:
    return f"{visit.visit_id}/{ref.path.rsplit('/', 1)[-1]}"


def preprocess_frames(frames: np.ndarray, spacing: float, kind: str, clip: ClipConfig) -> np.ndarray:
    """Resample to the modality's physical scale; videos are also temporally subsampled."""
    frames = np.asarray(frames, dtype=np.float32)
    if kind == "image":
        if frames.ndim != 2:
            raise ValidationError(f"image media must be 2-D, got shape {frames.shape}")
        w, h = clip.image_dims
        out = resample_array(frames, spacing, clip.image_spacing, w, h)
    else:
        if frames.ndim != 3:
            raise ValidationError(f"video media must be (T, H, W), got shape {frames.shape}")
        w, h = clip.video_dims
        out = resample_array(temporal_subsample(frames, clip.temporal_stride), spacing,
                             clip.video_spacing, w, h)
    return out.astype(STORE_DTYPE)


class MediaSource:
    """Preprocessed media for (visit, ref) pairs, loaded lazily and memoized."""

    def __init__(self, store, clip: ClipConfig, cache: bool = True):
        self.store = store
        self.clip = clip
        self._cache: dict[str, np.ndarray] | None = {} if cache else None

    def get(self, visit, ref) -> PreprocessedMedia:
        key = media_id(visit, ref)
        if self._cache is not None and key in self._cache:
            return PreprocessedMedia(ref.kind, self._cache[key], key)
        loaded = getattr(self.store, "load_preprocessed", None)
        if loaded is not None:
            pixels = loaded(visit, ref)
        else:
            frames, spacing = self.store.load(visit, ref)
            pixels = preprocess_frames(frames, spacing, ref.kind, self.clip)
        if self._cache is not None:
            self._cache[key] = pixels
        return PreprocessedMedia(ref.kind, pixels, key)


class TrainingSet:
    """Indexable ``(pixels, ga_days)`` items: one per image, or one per video clip."""

    def __init__(self, cohort, source: MediaSource, kind: str):
        self.kind = kind
        self.items: list[tuple[np.ndarray, int, int]] = []
        clip = source.clip
        for _, visit in cohort.visits():
            for ref in visit.media:
                if ref.kind != kind:
                    continue
                pixels = source.get(visit, ref).pixels
                if kind == "image":
                    self.items.append((pixels, 0, visit.ga))
                    continue
                n = pixels.shape[0]
                starts = range(0, n - clip.clip_len + 1, clip.window_stride) if n >= clip.clip_len else [0]
                self.items.extend((pixels, s, visit.ga) for s in starts)
        self.clip_len = clip.clip_len

    def __len__(self):
        return len(self.items)

    def __getitem__(self, i):
        pixels, start, ga = self.items[i]
        if self.kind == "image":
            return pixels.astype(np.float32), ga
        clip = pixels[start:start + self.clip_len]
        if clip.shape[0] < self.clip_len:
            pad = np.repeat(clip[-1:], self.clip_len - clip.shape[0], axis=0)
            clip = np.concatenate([clip, pad], axis=0)
        return clip.astype(np.float32), ga

    def labels(self) -> np.ndarray:
        return np.array([ga for _, _, ga in self.items], dtype=np.float64)


def new_model(model_id: str, seed: int) -> HeteroscedasticNet:
    if model_id not in MODEL_KIND:
        raise ConfigError(f"unknown model id {model_id!r}; choose from {MODEL_IDS}")
    cls = ImageNet if MODEL_KIND[model_id] == "image" else VideoNet
    return cls(seed=derive_seed(seed, "model", model_id) & 0x7FFFFFFF)


def train_models(cohort, source: MediaSource, preset: Preset, seed: int, models=None):
    """Train each requested model on ``cohort``; returns ``{model_id: (net, LossCurve)}``."""
    results = {}
    datasets: dict[str, TrainingSet] = {}
    for model_id in models or preset.models:
        kind = MODEL_KIND[model_id]
        if kind not in datasets:
            datasets[kind] = TrainingSet(cohort, source, kind)
        data = datasets[kind]
        net = new_model(model_id, seed)
        t = np.asarray(net.transform.forward(data.labels()))
        net.init_heads(float(t.mean()), float(t.var()) + 1e-3)
        config = replace(preset.train_config(model_id), seed=derive_seed(seed, "train", model_id))
        log.info("training %s on %d items for %d steps", model_id, len(data), config.max_steps)
        results[model_id] = train(net, data, config)
    return results


def predict_cases(models: dict, cohort, source: MediaSource, visit_ids=None):
    """Case estimates per visit: ``[(patient_id, visit_id, CaseEstimate), ...]``.

    Each model's per-image or per-clip estimates are inverse-variance pooled
    within the visit; the ``video`` and ``ensemble`` rows average the member
    models that produced a case estimate.
    """
    wanted = None if visit_ids is None else set(visit_ids)
    clip = source.clip
    rows = []
    for patient, visit in cohort.visits():
        if wanted is not None and visit.visit_id not in wanted:
            continue
        per_model: dict[str, CaseEstimate] = {}
        for model_id in sorted(models):
            net = models[model_id]
            estimates = []
            for ref in visit.media:
                if ref.kind != net.modality:
                    continue
                media = source.get(visit, ref)
                estimates.extend(e for _, e in predict_media(net, media, clip.clip_len, clip.window_stride))
            if estimates:
                per_model[model_id] = inverse_variance_aggregate(estimates, model_id)
        for name, members in ENSEMBLES.items():
            present = [per_model[m] for m in members if m in per_model]
            if len(present) == len(members):
                per_model[name] = ensemble_cases(present, name)
        rows.extend((patient.patient_id, visit.visit_id, per_model[m]) for m in sorted(per_model))
    return rows
