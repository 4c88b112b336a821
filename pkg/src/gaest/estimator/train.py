"""Minibatch training loop for the heteroscedastic regressors."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from gaest.cohort.types import GA_MAX_DAYS, GA_MIN_DAYS
from gaest.errors import ConfigError, TrainingDivergedError, ValidationError
from gaest.estimator.loss import nll_grad, nll_loss
from gaest.estimator.optim import AdamState, ImageExpDecay, VideoLinear, adamw_step, lr_at
from gaest.imaging import AugmentConfig, augment
from gaest.rng import make_rng

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class TrainConfig:
    batch_size: int = 8
    max_steps: int = 2000
    schedule: ImageExpDecay | VideoLinear = field(default_factory=ImageExpDecay)
    weight_decay: float = 1e-4
    keep_prob: float = 0.985
    betas: tuple[float, float] = (0.9, 0.999)
    eps: float = 1e-8
    augment: AugmentConfig = field(default_factory=AugmentConfig.identity)
    seed: int = 0

    def __post_init__(self):
        if not 0 < self.keep_prob <= 1:
            raise ConfigError(f"keep probability must be in (0, 1], got {self.keep_prob}")
        if self.batch_size < 1 or self.max_steps < 0:
            raise ConfigError("batch_size must be >= 1 and max_steps >= 0")


@dataclass
class LossCurve:
    steps: list = field(default_factory=list)
    lrs: list = field(default_factory=list)
    losses: list = field(default_factory=list)

    def to_csv(self, header_text: str = "") -> str:
        rows = [f"{s},{lr!r},{loss!r}" for s, lr, loss in zip(self.steps, self.lrs, self.losses)]
        return header_text + "step,lr,loss\n" + "".join(r + "\n" for r in rows)


def train(predictor, dataset, config: TrainConfig):
    """Fit ``predictor`` on ``dataset`` (a sequence of ``(input, ga_days)``).

    Returns a trained copy and the per-step loss curve; the input predictor is
    left untouched.
    """
    n = len(dataset)
    if n == 0:
        raise ValidationError("training dataset is empty")
    model = predictor.copy()
    model.keep_prob = config.keep_prob
    transform = model.transform
    rng = make_rng(config.seed, "train", model.modality)
    state = AdamState()
    curve = LossCurve()
    for step in range(config.max_steps):
        idx = rng.integers(0, n, size=config.batch_size)
        xs, gas = [], []
        for i in idx:
            x, ga = dataset[int(i)]
            if not GA_MIN_DAYS <= ga <= GA_MAX_DAYS:
                raise ValidationError(f"label {ga} outside [{GA_MIN_DAYS}, {GA_MAX_DAYS}] days")
            xs.append(augment(x, config.augment, rng))
            gas.append(ga)
        target = np.asarray(transform.forward(np.asarray(gas, dtype=np.float64)))
        out, cache = model.forward(np.stack(xs), train=True, rng=rng)
        loss = float(np.mean(nll_loss(out.mu_t, out.var_t, target)))
        if not np.isfinite(loss):
            raise TrainingDivergedError(
                f"{model.modality} model diverged at step {step}: loss={loss}, "
                f"mean var_t={np.mean(out.var_t):.3g}, lr={lr_at(config.schedule, step):.3g}"
            )
        dmu, dvar = nll_grad(out.mu_t, out.var_t, target)
        grads = model.backward(cache, np.asarray(dmu) / len(idx), np.asarray(dvar) / len(idx))
        lr = lr_at(config.schedule, step)
        adamw_step(model.params, grads, state, lr, config.weight_decay, config.betas, config.eps)
        curve.steps.append(step)
        curve.lrs.append(lr)
        curve.losses.append(loss)
        if step % 500 == 0:
            log.info("%s step %d lr %.3g loss %.4f", model.modality, step, lr, loss)
    return model, curve
