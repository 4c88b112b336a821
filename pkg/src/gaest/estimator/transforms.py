"""Label-space transforms between GA in days and network output space."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from gaest.errors import ConfigError, ValidationError


@dataclass(frozen=True)
class LabelTransform:
    """``log_affine``: t = m * (ln(ga) + b).  ``linear``: t = m * ga."""

    kind: str
    multiplier: float
    offset: float = 0.0

    def __post_init__(self):
        if self.kind not in ("log_affine", "linear"):
            raise ConfigError(f"unknown label transform kind {self.kind!r}")
        if self.multiplier == 0:
            raise ConfigError("label multiplier must be non-zero")
        if self.kind == "linear" and self.offset != 0:
            raise ConfigError("linear transform takes no offset")

    def forward(self, ga_days):
        ga = np.asarray(ga_days, dtype=np.float64)
        if self.kind == "linear":
            return _scalar(self.multiplier * ga)
        if np.any(ga <= 0):
            raise ValidationError("log-affine label transform needs ga_days > 0")
        return _scalar(self.multiplier * (np.log(ga) + self.offset))

    def inverse(self, t):
        t = np.asarray(t, dtype=np.float64)
        if not np.all(np.isfinite(t)):
            raise ValidationError("label inverse needs finite model output")
        if self.kind == "linear":
            return _scalar(t / self.multiplier)
        return _scalar(np.exp(t / self.multiplier - self.offset))

    def inverse_variance(self, t, var_t):
        """First-order (delta-method) variance in days^2."""
        t = np.asarray(t, dtype=np.float64)
        if self.kind == "linear":
            slope = 1.0 / self.multiplier
        else:
            slope = np.asarray(self.inverse(t)) / self.multiplier
        return _scalar(np.asarray(var_t, dtype=np.float64) * slope ** 2)


def _scalar(a):
    a = np.asarray(a)
    return float(a) if a.ndim == 0 else a


VIDEO_TRANSFORM = LabelTransform("log_affine", 3.43, -5.2)
IMAGE_TRANSFORM = LabelTransform("linear", 0.01)


def label_forward(transform: LabelTransform, ga_days):
    return transform.forward(ga_days)


def label_inverse(transform: LabelTransform, t, var_t=None):
    """GA in days, or ``(ga, var_ga)`` when a transformed-space variance is given."""
    ga = transform.inverse(t)
    if var_t is None:
        return ga
    return ga, transform.inverse_variance(t, var_t)


def softplus(x):
    return _scalar(np.logaddexp(0.0, np.asarray(x, dtype=np.float64)))


def sigmoid(x):
    x = np.asarray(x, dtype=np.float64)
    return _scalar(np.exp(-np.logaddexp(0.0, -x)))
