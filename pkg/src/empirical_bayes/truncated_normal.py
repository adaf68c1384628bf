"""
Parametric empirical Bayes with a left-truncated normal prior.

With unit noise and a prior N(alpha, gamma^2) truncated to [0, inf), the
posterior of mu is a normal with mean delta(y) = alpha + nu^2 (y - alpha) and
variance nu^2 = gamma^2 / (gamma^2 + 1), truncated at zero. Its mean is
delta + nu * kappa(-delta / nu) with the inverse Mills ratio
kappa(x) = phi(x) / (1 - Phi(x)). Writing x = -delta / nu this is
nu * (kappa(x) - x), the form that gets computed.

The moment estimators ignore the truncation, exactly as the method is
usually stated; callers with sigma != 1 rescale the panel first.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import special

from src.data_pipline.models import NoisyPanel
from src.utilities.errors import InvalidInputError

_UNIT_NOISE_TOL: float = 1e-12
# above this argument kappa(x) - x is taken from its continued fraction
_TAIL_START: float = 8.0
_TAIL_TERMS: int = 60
_SQRT_2_OVER_PI: float = float(np.sqrt(2.0 / np.pi))


@dataclass(frozen=True)
class TruncNormParams:
    alpha: float
    gamma_sq: float
    nu_sq: float

    def __post_init__(self) -> None:
        if self.gamma_sq < 0:
            raise InvalidInputError(f"gamma_sq must be nonnegative, got {self.gamma_sq}")
        if abs(self.nu_sq - self.gamma_sq / (self.gamma_sq + 1.0)) > 1e-12:
            raise InvalidInputError("nu_sq must equal gamma_sq / (gamma_sq + 1)")

    @classmethod
    def from_prior_variance(cls, alpha: float, gamma_sq: float) -> TruncNormParams:
        gamma_sq = float(gamma_sq)
        return cls(float(alpha), gamma_sq, gamma_sq / (gamma_sq + 1.0))

    @property
    def nu(self) -> float:
        return float(np.sqrt(self.nu_sq))


def inverse_mills_ratio(x) -> float | np.ndarray:
    """ kappa(x) = phi(x) / (1 - Phi(x)) = sqrt(2 / pi) / erfcx(x / sqrt(2)) """
    value = _SQRT_2_OVER_PI / special.erfcx(np.asarray(x, dtype=float) / np.sqrt(2.0))
    return float(value) if np.ndim(x) == 0 else value


def mills_excess(x) -> float | np.ndarray:
    """
    kappa(x) - x without cancellation.

    Uses the erfcx form below _TAIL_START and the continued fraction
    1 / (x + 2 / (x + 3 / (x + ...))) above it, so the result stays positive
    and behaves like 1 / x as x grows.
    """
    shape = np.shape(x)
    flat = np.atleast_1d(np.asarray(x, dtype=float)).ravel()
    result = np.empty_like(flat)
    body = flat < _TAIL_START
    result[body] = inverse_mills_ratio(flat[body]) - flat[body]

    tail = flat[~body]
    fraction = np.zeros_like(tail)
    for k in range(_TAIL_TERMS, 1, -1):
        fraction = k / (tail + fraction)
    result[~body] = 1.0 / (tail + fraction)
    return float(result[0]) if shape == () else result.reshape(shape)


def fit_truncated_normal(panel: NoisyPanel) -> TruncNormParams:
    """
    Method-of-moments fit: alpha = mean(y), gamma^2 = max(0, var(y) - 1).

    :param panel: a panel with sigma_i = 1 for every household
    """
    if len(panel) == 0:
        raise InvalidInputError("cannot fit a prior to an empty panel")
    if np.any(np.abs(panel.noise_scales - 1.0) > _UNIT_NOISE_TOL):
        raise InvalidInputError("truncated-normal fit requires unit noise scales; rescale the panel first")

    alpha = float(panel.estimates.mean())
    gamma_sq = max(0.0, float(np.mean((panel.estimates - alpha) ** 2)) - 1.0)
    return TruncNormParams.from_prior_variance(alpha, gamma_sq)


def truncated_normal_posterior_mean(params: TruncNormParams, y_hat) -> float | np.ndarray:
    """ delta(y) + nu * kappa(-delta(y) / nu), evaluated as nu * (kappa(x) - x); max(0, delta) when nu = 0 """
    y = np.asarray(y_hat, dtype=float)
    delta = params.alpha + params.nu_sq * (y - params.alpha)
    if params.nu_sq == 0:
        result = np.maximum(delta, 0.0)
    else:
        nu = params.nu
        result = nu * np.asarray(mills_excess(-delta / nu))
    return float(result) if np.ndim(result) == 0 else result
