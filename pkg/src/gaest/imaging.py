"""Frame resampling to a fixed physical scale, clip extraction and augmentation."""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import ndimage

from gaest.errors import ConfigError, ValidationError


@dataclass(frozen=True, eq=False)
class Frame:
    """Grayscale frame with isotropic pixel spacing (cm/pixel), intensities in [0, 1]."""

    pixels: np.ndarray
    pixel_spacing: float

    def __post_init__(self):
        if not self.pixel_spacing > 0:
            raise ValidationError(f"pixel_spacing must be > 0, got {self.pixel_spacing}")
        if np.ndim(self.pixels) != 2:
            raise ValidationError(f"frame pixels must be 2-D, got shape {np.shape(self.pixels)}")

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]


@dataclass(frozen=True, eq=False)
class Clip:
    start: int
    frames: np.ndarray  # (T, H, W)

    def __len__(self):
        return self.frames.shape[0]


@dataclass(frozen=True)
class ClipConfig:
    clip_len: int = 24
    temporal_stride: int = 2
    window_stride: int = 8
    video_dims: tuple[int, int] = (576, 432)  # (width, height)
    video_spacing: float = 0.0333
    image_dims: tuple[int, int] = (320, 240)
    image_spacing: float = 0.06

    def __post_init__(self):
        if self.clip_len < 1 or self.temporal_stride < 1 or self.window_stride < 1:
            raise ConfigError("clip_len and strides must be >= 1")
        if not (self.video_spacing > 0 and self.image_spacing > 0):
            raise ConfigError("target spacings must be > 0")


@dataclass(frozen=True)
class AugmentConfig:
    hflip: bool = True
    crop: bool = True
    crop_min_fraction: float = 0.8
    max_rotation_deg: float = 45.0
    saturation_range: tuple[float, float] = (0.38, 1.4)
    max_brightness_delta: float = 0.52
    contrast_range: tuple[float, float] = (0.34, 1.35)
    max_hue_delta: float = 0.13

    def __post_init__(self):
        for name in ("saturation_range", "contrast_range"):
            lo, hi = getattr(self, name)
            if not 0 <= lo <= hi:
                raise ConfigError(f"{name} must satisfy 0 <= lo <= hi, got {(lo, hi)}")
        if min(self.max_rotation_deg, self.max_brightness_delta, self.max_hue_delta) < 0:
            raise ConfigError("augmentation deltas must be >= 0")
        if not 0 < self.crop_min_fraction <= 1:
            raise ConfigError("crop_min_fraction must be in (0, 1]")

    @classmethod
    def identity(cls) -> "AugmentConfig":
        return cls(hflip=False, crop=False, max_rotation_deg=0.0, saturation_range=(1.0, 1.0),
                   max_brightness_delta=0.0, contrast_range=(1.0, 1.0), max_hue_delta=0.0)


def _axis_weights(n_in: int, coords: np.ndarray):
    # half-pixel footprint: coordinates within [-0.5, n-0.5] are inside the content
    valid = (coords >= -0.5) & (coords <= n_in - 0.5)
    c = np.clip(coords, 0.0, n_in - 1)
    i0 = np.floor(c).astype(np.intp)
    i1 = np.minimum(i0 + 1, n_in - 1)
    frac = c - i0
    return i0, i1, frac, valid


def _sample_grid(arr: np.ndarray, ys: np.ndarray, xs: np.ndarray) -> np.ndarray:
    """Bilinear sampling of the last two axes on a separable grid; zero outside."""
    y0, y1, fy, vy = _axis_weights(arr.shape[-2], ys)
    x0, x1, fx, vx = _axis_weights(arr.shape[-1], xs)
    rows0 = arr[..., y0, :]
    rows1 = arr[..., y1, :]
    top = rows0[..., x0] * (1.0 - fx) + rows0[..., x1] * fx
    bot = rows1[..., x0] * (1.0 - fx) + rows1[..., x1] * fx
    out = top * (1.0 - fy)[:, None] + bot * fy[:, None]
    mask = vy[:, None] & vx[None, :]
    return np.where(mask, out, 0.0).astype(arr.dtype, copy=False)


def resample_array(arr: np.ndarray, spacing: float, target_spacing: float,
                   target_w: int, target_h: int) -> np.ndarray:
    """Rescale the last two axes to ``target_spacing`` and center-crop/zero-pad to target dims."""
    if not (spacing > 0 and target_spacing > 0):
        raise ValidationError(f"pixel spacings must be > 0, got {spacing} -> {target_spacing}")
    h, w = arr.shape[-2:]
    if spacing == target_spacing and (h, w) == (target_h, target_w):
        return arr.copy()
    ratio = target_spacing / spacing  # input pixels per output pixel
    ys = (h - 1) / 2.0 + (np.arange(target_h) - (target_h - 1) / 2.0) * ratio
    xs = (w - 1) / 2.0 + (np.arange(target_w) - (target_w - 1) / 2.0) * ratio
    return _sample_grid(arr, ys, xs)


def resample_to_physical_scale(frame: Frame, target_spacing: float, target_w: int, target_h: int) -> Frame:
    pixels = resample_array(frame.pixels, frame.pixel_spacing, target_spacing, target_w, target_h)
    return Frame(pixels, target_spacing)


def resize_array(arr: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """Plain bilinear resize of the last two axes (half-pixel centers)."""
    h, w = arr.shape[-2:]
    ys = (np.arange(out_h) + 0.5) * (h / out_h) - 0.5
    xs = (np.arange(out_w) + 0.5) * (w / out_w) - 0.5
    return _sample_grid(arr, ys, xs)


def temporal_subsample(frames, factor: int):
    if factor < 1:
        raise ConfigError(f"temporal subsample factor must be >= 1, got {factor}")
    return frames[::factor]


def extract_clips(frames, clip_len: int = 24, window_stride: int = 8) -> list[Clip]:
    """Overlapping fixed-length clips; a short video yields one clip padded with its last frame."""
    if clip_len < 1 or window_stride < 1:
        raise ConfigError("clip_len and window_stride must be >= 1")
    frames = np.asarray(frames)
    n = frames.shape[0] if frames.ndim else 0
    if n == 0:
        raise ValidationError("cannot extract clips from an empty frame list")
    if n < clip_len:
        pad = np.repeat(frames[-1:], clip_len - n, axis=0)
        return [Clip(0, np.concatenate([frames, pad], axis=0))]
    return [Clip(s, frames[s:s + clip_len]) for s in range(0, n - clip_len + 1, window_stride)]


_LUMA = np.array([0.299, 0.587, 0.114])
_YIQ = np.array([[0.299, 0.587, 0.114],
                 [0.596, -0.274, -0.322],
                 [0.211, -0.523, 0.312]])
_YIQ_INV = np.linalg.inv(_YIQ)


def _photometric(x: np.ndarray, sat: float, bright: float, contrast: float, hue: float) -> np.ndarray:
    # gray is lifted to RGB so saturation/hue act as they would on color input
    rgb = np.stack([x, x, x], axis=-1).astype(np.float64)
    if sat != 1.0:
        gray = (rgb @ _LUMA)[..., None]
        rgb = gray + sat * (rgb - gray)
    if bright != 0.0:
        rgb = rgb + bright
    if contrast != 1.0:
        mean = rgb.mean(axis=(-3, -2), keepdims=True)
        rgb = (rgb - mean) * contrast + mean
    if hue != 0.0:
        yiq = rgb @ _YIQ.T
        theta = 2.0 * math.pi * hue
        c, s = math.cos(theta), math.sin(theta)
        i, q = yiq[..., 1].copy(), yiq[..., 2].copy()
        yiq[..., 1] = c * i - s * q
        yiq[..., 2] = s * i + c * q
        rgb = yiq @ _YIQ_INV.T
    return rgb @ (_LUMA / _LUMA.sum())


def augment(x, config: AugmentConfig, rng: np.random.Generator):
    """Random flip, crop, rotation and photometric jitter.

    ``x`` may be a :class:`Frame`, a :class:`Clip` or a bare array of shape
    (H, W) or (T, H, W). Every frame of a clip receives the same draw.
    """
    if isinstance(x, Frame):
        return Frame(augment(x.pixels, config, rng), x.pixel_spacing)
    if isinstance(x, Clip):
        return Clip(x.start, augment(x.frames, config, rng))
    arr = np.asarray(x)
    out = arr
    h, w = arr.shape[-2:]
    if config.hflip and rng.random() < 0.5:
        out = out[..., ::-1]
    if config.crop:
        f = rng.uniform(config.crop_min_fraction, 1.0)
        ch, cw = max(1, round(h * f)), max(1, round(w * f))
        top = int(rng.integers(0, h - ch + 1))
        left = int(rng.integers(0, w - cw + 1))
        out = resize_array(out[..., top:top + ch, left:left + cw], h, w)
    if config.max_rotation_deg > 0:
        angle = rng.uniform(-config.max_rotation_deg, config.max_rotation_deg)
        out = ndimage.rotate(out, angle, axes=(-1, -2), reshape=False, order=1, mode="constant", cval=0.0)
    sat = rng.uniform(*config.saturation_range) if config.saturation_range != (1.0, 1.0) else 1.0
    bright = (rng.uniform(-config.max_brightness_delta, config.max_brightness_delta)
              if config.max_brightness_delta > 0 else 0.0)
    contrast = rng.uniform(*config.contrast_range) if config.contrast_range != (1.0, 1.0) else 1.0
    hue = rng.uniform(-config.max_hue_delta, config.max_hue_delta) if config.max_hue_delta > 0 else 0.0
    if (sat, bright, contrast, hue) != (1.0, 0.0, 1.0, 0.0):
        out = _photometric(out, sat, bright, contrast, hue)
    if out is arr:
        return arr.copy()
    return np.clip(out, 0.0, 1.0).astype(arr.dtype, copy=False)


def augment_with_brightness(x: np.ndarray, delta: float) -> np.ndarray:
    """Deterministic brightness shift, clamped to [0, 1]."""
    return np.clip(_photometric(np.asarray(x, dtype=np.float64), 1.0, delta, 1.0, 0.0), 0.0, 1.0)


# -- PGM (P5) --------------------------------------------------------------

def to_uint8(pixels: np.ndarray) -> np.ndarray:
    return np.round(np.clip(pixels, 0.0, 1.0) * 255.0).astype(np.uint8)


def write_pgm(path, pixels: np.ndarray, comment: str = "") -> None:
    data = pixels if pixels.dtype == np.uint8 else to_uint8(pixels)
    h, w = data.shape
    head = "P5\n"
    if comment:
        head += "".join(f"# {line}\n" for line in comment.splitlines())
    head += f"{w} {h}\n255\n"
    Path(path).write_bytes(head.encode("ascii") + np.ascontiguousarray(data).tobytes())


_PGM_TOKEN = re.compile(rb"\s*(?:#[^\n]*\n\s*)*(\S+)")


def read_pgm(path, as_uint8: bool = False) -> np.ndarray:
    raw = Path(path).read_bytes()
    pos = 0
    tokens = []
    while len(tokens) < 4:
        m = _PGM_TOKEN.match(raw, pos)
        if m is None:
            raise ValidationError(f"{path}: truncated PGM header")
        tokens.append(m.group(1))
        pos = m.end()
    if tokens[0] != b"P5":
        raise ValidationError(f"{path}: not a binary PGM (P5) file")
    w, h, maxval = (int(t) for t in tokens[1:])
    if maxval != 255:
        raise ValidationError(f"{path}: only 8-bit PGM supported")
    pos += 1  # single whitespace after maxval
    data = np.frombuffer(raw, dtype=np.uint8, count=w * h, offset=pos).reshape(h, w)
    if as_uint8:
        return data.copy()
    return data.astype(np.float32) / 255.0
