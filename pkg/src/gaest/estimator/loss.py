"""Gaussian mean-variance (heteroscedastic) regression loss."""

from __future__ import annotations

import numpy as np

from gaest.errors import ValidationError


def _check_var(var_t):
    if np.any(np.asarray(var_t) <= 0):
        raise ValidationError("predicted variance must be > 0")


def nll_loss(mu_t, var_t, target_t):
    """0.5*ln(var) + (target - mu)^2 / (2*var); the constant 0.5*ln(2*pi) is dropped."""
    _check_var(var_t)
    mu, var, y = (np.asarray(a, dtype=np.float64) for a in (mu_t, var_t, target_t))
    out = 0.5 * np.log(var) + (y - mu) ** 2 / (2.0 * var)
    return float(out) if out.ndim == 0 else out


def nll_grad(mu_t, var_t, target_t):
    """Analytic ``(dloss/dmu, dloss/dvar)``."""
    _check_var(var_t)
    mu, var, y = (np.asarray(a, dtype=np.float64) for a in (mu_t, var_t, target_t))
    dmu = (mu - y) / var
    dvar = 0.5 / var - (y - mu) ** 2 / (2.0 * var ** 2)
    if dmu.ndim == 0:
        return float(dmu), float(dvar)
    return dmu, dvar
