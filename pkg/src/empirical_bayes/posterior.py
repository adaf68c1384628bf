"""
Marginal densities and posterior means under a discrete prior.

Every mixture sum is shifted per observation by its largest component
log-density before exponentiating, so nothing underflows for realistic
inputs. ``tweedie_posterior_mean`` computes the score of the marginal
analytically and is kept as an independent cross-check of ``posterior_mean``.
"""
from __future__ import annotations

import warnings

import numpy as np
from scipy.special import logsumexp

from src.empirical_bayes.prior import DiscretePrior
from src.utilities.app_logger import AppLogger

_LOG_SQRT_2PI: float = 0.5 * np.log(2.0 * np.pi)

logger = AppLogger().get_logger(__name__)


class PosteriorUnderflowWarning(RuntimeWarning):
    """ Posterior weights vanished; the nearest support point was returned instead """


def log_gaussian(x: np.ndarray, mu: np.ndarray, sigma: np.ndarray) -> np.ndarray:
    """ log of phi((x - mu) / sigma) / sigma, broadcasting over the inputs """
    return -0.5 * ((x - mu) / sigma) ** 2 - np.log(sigma) - _LOG_SQRT_2PI


def _component_log_densities(prior: DiscretePrior, y_hat, sigma) -> tuple[np.ndarray, np.ndarray]:
    y = np.atleast_1d(np.asarray(y_hat, dtype=float))
    s = np.broadcast_to(np.asarray(sigma, dtype=float), y.shape)
    return y, log_gaussian(y[:, None], prior.support[None, :], s[:, None])


def _responsibilities(prior: DiscretePrior, y_hat, sigma) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """ Unnormalized shifted posterior weights, their row sums, and the estimates """
    y, log_comp = _component_log_densities(prior, y_hat, sigma)
    with np.errstate(divide="ignore"):
        log_joint = log_comp + np.log(prior.weights)[None, :]
    shift = log_joint.max(axis=1, keepdims=True)
    with np.errstate(invalid="ignore"):
        resp = np.exp(log_joint - shift)
    return resp, resp.sum(axis=1), y


def _unwrap(values: np.ndarray, like) -> float | np.ndarray:
    return float(values[0]) if np.ndim(like) == 0 else values


def marginal_log_density(prior: DiscretePrior, y_hat, sigma) -> float | np.ndarray:
    """ log f_G(y_hat) = log sum_k w_k phi((y_hat - mu_k) / sigma) / sigma """
    _, log_comp = _component_log_densities(prior, y_hat, sigma)
    return _unwrap(logsumexp(log_comp, b=prior.weights[None, :], axis=1), y_hat)


def _nearest_support(prior: DiscretePrior, y: np.ndarray) -> np.ndarray:
    idx = np.abs(y[:, None] - prior.support[None, :]).argmin(axis=1)
    return prior.support[idx]


def posterior_mean(prior: DiscretePrior, y_hat, sigma) -> float | np.ndarray:
    """
    E_G[mu | y_hat, sigma] for a scalar or an array of estimates.

    The result always lies within [min support, max support]. If the posterior
    weights of an observation vanish the nearest support point is returned and
    a ``PosteriorUnderflowWarning`` is issued.
    """
    resp, total, y = _responsibilities(prior, y_hat, sigma)
    with np.errstate(invalid="ignore", divide="ignore"):
        means = (resp @ prior.support) / total

    failed = ~np.isfinite(means) | ~(total > 0)
    if np.any(failed):
        logger.warning("posterior weights underflowed count=%d; using nearest support point", int(failed.sum()))
        warnings.warn(
            f"posterior weights underflowed for {int(failed.sum())} observation(s)",
            PosteriorUnderflowWarning,
            stacklevel=2,
        )
        means[failed] = _nearest_support(prior, y[failed])

    return _unwrap(np.clip(means, prior.support[0], prior.support[-1]), y_hat)


def marginal_score(prior: DiscretePrior, y_hat, sigma) -> float | np.ndarray:
    """ d/dy log f_G(y), from the mixture's analytic derivative """
    resp, total, y = _responsibilities(prior, y_hat, sigma)
    s = np.broadcast_to(np.asarray(sigma, dtype=float), y.shape)
    score = (resp @ prior.support - total * y) / (total * s**2)
    return _unwrap(score, y_hat)


def tweedie_posterior_mean(prior: DiscretePrior, y_hat, sigma) -> float | np.ndarray:
    """ Tweedie's formula: y_hat + sigma^2 * d/dy log f_G(y_hat) """
    y = np.atleast_1d(np.asarray(y_hat, dtype=float))
    s = np.broadcast_to(np.asarray(sigma, dtype=float), y.shape)
    score = np.atleast_1d(marginal_score(prior, y, s))
    return _unwrap(y + s**2 * score, y_hat)
