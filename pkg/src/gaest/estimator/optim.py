"""AdamW with decoupled weight decay, and the two learning-rate schedules."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from gaest.errors import ConfigError, ValidationError


@dataclass(frozen=True)
class ImageExpDecay:
    lr0: float = 4.56e-5
    decay_steps: int = 15490
    factor: float = 0.933

    def __post_init__(self):
        if not (self.lr0 > 0 and self.decay_steps > 0 and self.factor > 0):
            raise ConfigError("exponential decay parameters must be > 0")

    def lr_at(self, step: int) -> float:
        return self.lr0 * self.factor ** (step / self.decay_steps)


@dataclass(frozen=True)
class VideoLinear:
    lr0: float = 4.58e-4
    lr_final: float = 4.58e-7
    total_steps: int = 100_000

    def __post_init__(self):
        if not (self.lr0 > 0 and self.lr_final > 0 and self.total_steps > 0):
            raise ConfigError("linear schedule parameters must be > 0")

    def lr_at(self, step: int) -> float:
        if step >= self.total_steps:
            return self.lr_final
        return self.lr0 + (self.lr_final - self.lr0) * (step / self.total_steps)


def lr_at(schedule, step: int) -> float:
    if step < 0:
        raise ConfigError(f"step must be >= 0, got {step}")
    return schedule.lr_at(step)


@dataclass
class AdamState:
    step: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)


def adamw_step(params: dict, grads: dict, state: AdamState, lr: float, weight_decay: float = 0.0,
               betas=(0.9, 0.999), eps: float = 1e-8) -> None:
    """In-place AdamW update: w <- w - lr * (m_hat / (sqrt(v_hat) + eps) + wd * w)."""
    b1, b2 = betas
    state.step += 1
    t = state.step
    c1 = 1.0 - b1 ** t
    c2 = 1.0 - b2 ** t
    for name, w in params.items():
        g = grads[name]
        if np.shape(g) != np.shape(w):
            raise ValidationError(f"gradient shape {np.shape(g)} does not match parameter {name} {np.shape(w)}")
        m = state.m.get(name)
        if m is None:
            m = state.m[name] = np.zeros_like(w)
            state.v[name] = np.zeros_like(w)
        v = state.v[name]
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * g * g
        update = (m / c1) / (np.sqrt(v / c2) + eps) + weight_decay * w
        w -= (lr * update).astype(w.dtype, copy=False)
