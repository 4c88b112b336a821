"""Per-image and per-clip inference mapped back to GA days."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from gaest.aggregation import Estimate
from gaest.errors import ModalityError
from gaest.estimator.networks import VAR_FLOOR
from gaest.estimator.transforms import label_inverse
from gaest.imaging import extract_clips


@dataclass(frozen=True, eq=False)
class PreprocessedMedia:
    """Model-ready pixels: (H, W) for images, subsampled (T, H, W) frames for videos."""

    kind: str
    pixels: np.ndarray
    media_id: str = ""


def _to_estimates(predictor, batch, starts, media_id):
    out = predictor.predict(batch)
    var_t = np.maximum(np.asarray(out.var_t, dtype=np.float64), VAR_FLOOR)
    mean, var = label_inverse(predictor.transform, np.asarray(out.mu_t, dtype=np.float64), var_t)
    return [(s, Estimate(float(m), max(float(v), np.finfo(float).tiny), f"{media_id}#{s}"))
            for s, m, v in zip(starts, np.atleast_1d(mean), np.atleast_1d(var))]


def predict_media(predictor, media: PreprocessedMedia, clip_len: int = 24,
                  window_stride: int = 8) -> list[tuple[int, Estimate]]:
    """Estimates in GA days keyed by clip start frame (0 for an image), sorted by clip index."""
    if media.kind != predictor.modality:
        raise ModalityError(
            f"{predictor.modality} model cannot score {media.kind} media {media.media_id!r}"
        )
    if media.kind == "image":
        return _to_estimates(predictor, media.pixels[None], [0], media.media_id)
    clips = extract_clips(media.pixels, clip_len, window_stride)
    batch = np.stack([c.frames for c in clips])
    return _to_estimates(predictor, batch, [c.start for c in clips], media.media_id)
