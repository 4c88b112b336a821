"""Reference toy networks with mean and variance heads.

Both networks are plain numpy with hand-written backward passes. Activations
are kept channels-last (N, H, W, C). Parameters live in an ordered dict so the
optimizer and the weight-file writer can walk them by name.
"""

from __future__ import annotations

import copy
from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from gaest.errors import ModalityError
from gaest.rng import make_rng
from gaest.estimator.transforms import IMAGE_TRANSFORM, VIDEO_TRANSFORM, LabelTransform

VAR_FLOOR = 1e-6
# fixed input standardization; keeps the linear heads' weights at O(1) for [0, 1] pixels
INPUT_CENTER = 0.4
INPUT_SCALE = 0.2
IMAGE_MEAN_SCALE = 3.15  # sigmoid * 3.15 spans 0..315 days at multiplier 0.01


@dataclass
class EstimatorOutput:
    mu_t: np.ndarray
    var_t: np.ndarray


def conv_forward(x, w, b, stride, pad):
    n, h, wd, c = x.shape
    o, _, k, _ = w.shape
    xp = np.pad(x, ((0, 0), (pad, pad), (pad, pad), (0, 0)))
    ho = (h + 2 * pad - k) // stride + 1
    wo = (wd + 2 * pad - k) // stride + 1
    win = sliding_window_view(xp, (k, k), axis=(1, 2))[:, ::stride, ::stride][:, :ho, :wo]
    cols = win.reshape(n * ho * wo, c * k * k)
    out = cols @ w.reshape(o, -1).T + b
    return out.reshape(n, ho, wo, o), (cols, xp.shape, ho, wo)


def conv_backward(dout, w, cache, stride, pad):
    cols, xp_shape, ho, wo = cache
    o, c, k, _ = w.shape
    n = dout.shape[0]
    dmat = dout.reshape(-1, o)
    dw = (dmat.T @ cols).reshape(w.shape)
    db = dmat.sum(axis=0)
    dcols = (dmat @ w.reshape(o, -1)).reshape(n, ho, wo, c, k, k)
    dxp = np.zeros(xp_shape, dtype=dout.dtype)
    span_h = stride * (ho - 1) + 1
    span_w = stride * (wo - 1) + 1
    for i in range(k):
        for j in range(k):
            dxp[:, i:i + span_h:stride, j:j + span_w:stride, :] += dcols[..., i, j]
    hp, wp = xp_shape[1], xp_shape[2]
    return dxp[:, pad:hp - pad, pad:wp - pad, :], dw, db


def _sigmoid(x):
    return np.exp(-np.logaddexp(0.0, -x))


class HeteroscedasticNet:
    """Strided conv encoder, global average pool, dropout, mean and variance heads."""

    modality = ""
    transform: LabelTransform

    def __init__(self, channels, seed: int = 0, keep_prob: float = 1.0, dtype=np.float32):
        self.channels = tuple(channels)
        self.seed = seed
        self.keep_prob = keep_prob
        self.dtype = np.dtype(dtype)
        rng = make_rng(seed, "init")
        self.params: dict[str, np.ndarray] = {}
        c_in = 1
        for i, c_out in enumerate(self.channels):
            fan_in = c_in * 9
            self.params[f"conv{i}.w"] = (rng.standard_normal((c_out, c_in, 3, 3)) * np.sqrt(2.0 / fan_in)).astype(self.dtype)
            self.params[f"conv{i}.b"] = np.zeros(c_out, dtype=self.dtype)
            c_in = c_out
        self.params["mean.w"] = (rng.standard_normal(c_in) * 0.01).astype(self.dtype)
        self.params["mean.b"] = np.zeros(1, dtype=self.dtype)
        self.params["var.w"] = (rng.standard_normal(c_in) * 0.01).astype(self.dtype)
        self.params["var.b"] = np.zeros(1, dtype=self.dtype)

    # subclasses map their input to (N*, H, W, 1) frames and pooled features back to (N, F)
    def _to_frames(self, x):
        raise NotImplementedError

    def _pool_frames(self, feats, n):
        return feats

    def _unpool_frames(self, dfeats, n, t):
        return dfeats

    def _mean_head(self, o):
        return o, np.ones_like(o)

    def architecture(self) -> dict:
        return {"class": type(self).__name__, "channels": list(self.channels), "seed": self.seed,
                "keep_prob": self.keep_prob}

    def copy(self):
        return copy.deepcopy(self)

    def init_heads(self, mean_t: float, var_t: float):
        """Start the mean head at ``mean_t`` and the variance head at ``var_t``."""
        self.params["mean.b"][:] = self._mean_bias_for(mean_t)
        self.params["var.b"][:] = np.log(np.expm1(max(var_t - VAR_FLOOR, 1e-6)))

    def _mean_bias_for(self, mean_t):
        return mean_t

    def forward(self, x, train: bool = False, rng: np.random.Generator | None = None):
        x = (np.asarray(x, dtype=self.dtype) - INPUT_CENTER) / self.dtype.type(INPUT_SCALE)
        frames, n = self._to_frames(x)
        h = frames
        caches = []
        for i in range(len(self.channels)):
            z, cache = conv_forward(h, self.params[f"conv{i}.w"], self.params[f"conv{i}.b"], 2, 1)
            h = np.maximum(z, 0)
            caches.append((cache, z > 0))
        spatial = h.shape[1] * h.shape[2]
        pooled = self._pool_frames(h.mean(axis=(1, 2)), n)
        mask = None
        if train and self.keep_prob < 1.0:
            mask = (rng.random(pooled.shape) < self.keep_prob).astype(self.dtype) / self.keep_prob
            pooled = pooled * mask
        o_m = pooled @ self.params["mean.w"] + self.params["mean.b"][0]
        o_v = pooled @ self.params["var.w"] + self.params["var.b"][0]
        mu, dmu_do = self._mean_head(o_m.astype(np.float64))
        var = np.logaddexp(0.0, o_v.astype(np.float64)) + VAR_FLOOR
        cache = (caches, h.shape, spatial, pooled, mask, dmu_do, _sigmoid(o_v.astype(np.float64)), n,
                 frames.shape[0] // n)
        return EstimatorOutput(mu, var), cache

    def backward(self, cache, dmu, dvar) -> dict[str, np.ndarray]:
        caches, h_shape, spatial, pooled, mask, dmu_do, dvar_do, n, t = cache
        grads = {}
        do_m = (np.asarray(dmu) * dmu_do).astype(self.dtype)
        do_v = (np.asarray(dvar) * dvar_do).astype(self.dtype)
        grads["mean.w"] = pooled.T @ do_m
        grads["mean.b"] = np.array([do_m.sum()], dtype=self.dtype)
        grads["var.w"] = pooled.T @ do_v
        grads["var.b"] = np.array([do_v.sum()], dtype=self.dtype)
        dpooled = np.outer(do_m, self.params["mean.w"]) + np.outer(do_v, self.params["var.w"])
        if mask is not None:
            dpooled = dpooled * mask
        dfeat = self._unpool_frames(dpooled, n, t)
        dh = np.broadcast_to(dfeat[:, None, None, :] / spatial, h_shape).astype(self.dtype)
        for i in reversed(range(len(self.channels))):
            conv_cache, active = caches[i]
            dz = dh * active
            dh, dw, db = conv_backward(dz, self.params[f"conv{i}.w"], conv_cache, 2, 1)
            grads[f"conv{i}.w"] = dw
            grads[f"conv{i}.b"] = db
        return grads

    def predict(self, x) -> EstimatorOutput:
        out, _ = self.forward(x, train=False)
        return out


class ImageNet(HeteroscedasticNet):
    """Per-image regressor; mean head emits 3.15 * sigmoid(o) in linear label space."""

    modality = "image"
    transform = IMAGE_TRANSFORM

    def __init__(self, channels=(8, 16, 16), seed: int = 0, keep_prob: float = 0.985, dtype=np.float32):
        super().__init__(channels, seed, keep_prob, dtype)

    def _to_frames(self, x):
        if x.ndim != 3:
            raise ModalityError(f"image model expects (N, H, W) input, got shape {x.shape}")
        return x[..., None], x.shape[0]

    def _mean_head(self, o):
        s = _sigmoid(o)
        return IMAGE_MEAN_SCALE * s, IMAGE_MEAN_SCALE * s * (1.0 - s)

    def _mean_bias_for(self, mean_t):
        p = min(max(mean_t / IMAGE_MEAN_SCALE, 1e-6), 1 - 1e-6)
        return np.log(p / (1 - p))


class VideoNet(HeteroscedasticNet):
    """Per-clip regressor: shared per-frame encoder, temporal mean pool, linear mean head."""

    modality = "video"
    transform = VIDEO_TRANSFORM

    def __init__(self, channels=(8, 64), seed: int = 0, keep_prob: float = 0.8, dtype=np.float32):
        super().__init__(channels, seed, keep_prob, dtype)

    def _to_frames(self, x):
        if x.ndim != 4:
            raise ModalityError(f"video model expects (N, T, H, W) input, got shape {x.shape}")
        n, t = x.shape[:2]
        return x.reshape(n * t, x.shape[2], x.shape[3], 1), n

    def _pool_frames(self, feats, n):
        return feats.reshape(n, -1, feats.shape[-1]).mean(axis=1)

    def _unpool_frames(self, dfeats, n, t):
        return np.repeat(dfeats[:, None, :] / t, t, axis=1).reshape(n * t, -1)


NETWORKS = {"ImageNet": ImageNet, "VideoNet": VideoNet}


def build_network(arch: dict) -> HeteroscedasticNet:
    cls = NETWORKS[arch["class"]]
    return cls(channels=tuple(arch["channels"]), seed=arch["seed"], keep_prob=arch["keep_prob"])
