"""
Nonparametric maximum likelihood estimation of the mixing distribution.

The prior is restricted to a fixed grid and its weights are fitted by the EM
fixed-point iteration

    w_k <- w_k * (1/n) sum_i phi((y_i - mu_k) / sigma_i) / (sigma_i f(y_i))

which never decreases the average log-likelihood. Heteroskedastic sigma_i
enter the likelihood directly; a single prior is shared by every household.

Convergence is declared when successive average log-likelihoods differ by
less than ``tol``. Because the global optimum is unknown, the fit also reports
a first-order certificate: at a maximizer every grid point has
(1/n) sum_i L_ik / f_i <= 1, and ``stationarity_residual`` is the largest
excess over one.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
try:
    from enum import StrEnum
except ImportError:  # Python < 3.11
    from enum import Enum

    class StrEnum(str, Enum):
        __str__ = str.__str__
from typing import Optional

import numpy as np

from src.data_pipline.models import NoisyPanel
from src.empirical_bayes.posterior import log_gaussian, marginal_log_density
from src.empirical_bayes.prior import DiscretePrior
from src.utilities.app_logger import AppLogger
from src.utilities.errors import InvalidConfigError, InvalidInputError, NumericalFailureError

DEFAULT_TOL: float = 1e-9
DEFAULT_MAX_ITER: int = 10_000
DEFAULT_MIN_GRID: int = 100
STATIONARITY_TOL: float = 1e-6
GRID_SPAN_SIGMAS: float = 3.0
_MONOTONE_SLACK: float = 1e-12

logger = AppLogger().get_logger(__name__)


class GridSpacing(StrEnum):
    EQUAL = "equal"
    QUANTILE = "quantile"


@dataclass(frozen=True)
class NPMLEConfig:
    """ Knobs for the prior fit. ``grid_size=None`` means max(ceil(sqrt(n)), 100). """

    grid_size: Optional[int] = None
    tol: float = DEFAULT_TOL
    max_iter: int = DEFAULT_MAX_ITER
    grid_spacing: GridSpacing = GridSpacing.EQUAL

    def __post_init__(self) -> None:
        object.__setattr__(self, "grid_spacing", GridSpacing(self.grid_spacing))
        if self.grid_size is not None and self.grid_size < 1:
            raise InvalidConfigError(f"grid_size must be positive, got {self.grid_size}")
        if not self.tol > 0:
            raise InvalidConfigError(f"tol must be positive, got {self.tol}")
        if self.max_iter < 1:
            raise InvalidConfigError(f"max_iter must be at least 1, got {self.max_iter}")


@dataclass(frozen=True)
class NPMLEFit:
    """ A fitted prior together with its convergence diagnostics """

    prior: DiscretePrior
    iterations: int
    converged: bool
    loglik_trace: tuple[float, ...]
    stationarity_residual: float
    n: int
    grid_lower: float
    grid_upper: float

    @property
    def log_likelihood(self) -> float:
        """ Final average log-likelihood """
        return self.loglik_trace[-1]

    @property
    def certified(self) -> bool:
        return self.stationarity_residual <= STATIONARITY_TOL

    @property
    def trace_monotone(self) -> bool:
        return bool(np.all(np.diff(self.loglik_trace) >= -_MONOTONE_SLACK * max(1.0, abs(self.log_likelihood))))


def minimum_grid_size(n: int) -> int:
    return math.ceil(math.sqrt(n))


def default_grid_size(n: int) -> int:
    return max(minimum_grid_size(n), DEFAULT_MIN_GRID)


def build_grid(
    panel: NoisyPanel,
    grid_size: Optional[int] = None,
    spacing: GridSpacing = GridSpacing.EQUAL,
) -> np.ndarray:
    """
    Support grid spanning [max(0, min y - 3 sigma_max), max y + 3 sigma_max].

    :param panel: the noisy estimates
    :param grid_size: number of points; at least ceil(sqrt(n)), default max(ceil(sqrt(n)), 100)
    :param spacing: equally spaced (default) or at quantiles of the clipped estimates
    """
    n = len(panel)
    if grid_size is None:
        grid_size = default_grid_size(n)
    if grid_size < minimum_grid_size(n):
        raise InvalidConfigError(f"grid_size {grid_size} is below ceil(sqrt(n)) = {minimum_grid_size(n)}")

    sigma_max = float(panel.noise_scales.max())
    lower = max(0.0, float(panel.estimates.min()) - GRID_SPAN_SIGMAS * sigma_max)
    upper = float(panel.estimates.max()) + GRID_SPAN_SIGMAS * sigma_max
    if upper <= lower:
        # every estimate sits far below zero; keep a nondegenerate span at the origin
        upper = lower + GRID_SPAN_SIGMAS * sigma_max

    if grid_size == 1:
        return np.array([lower])

    if GridSpacing(spacing) is GridSpacing.QUANTILE:
        clipped = np.clip(panel.estimates, lower, upper)
        grid = np.quantile(clipped, np.linspace(0.0, 1.0, grid_size))
        grid[0], grid[-1] = lower, upper
        grid = np.unique(grid)
        if grid.size >= minimum_grid_size(n):
            return grid
        logger.warning("quantile grid collapsed to %d points; falling back to equal spacing", grid.size)

    return np.linspace(lower, upper, grid_size)


def _check_grid(grid: np.ndarray) -> np.ndarray:
    grid = np.asarray(grid, dtype=float).reshape(-1)
    if grid.size == 0 or not np.all(np.isfinite(grid)):
        raise InvalidConfigError("grid must be a nonempty finite sequence")
    if np.any(grid < 0) or np.any(np.diff(grid) <= 0):
        raise InvalidConfigError("grid must be nonnegative and strictly increasing")
    return grid


def _mixture_density(lik: np.ndarray, weights: np.ndarray) -> np.ndarray:
    f = lik @ weights
    if not np.all(np.isfinite(f)) or np.any(f <= 0):
        raise NumericalFailureError("mixture likelihood is zero or non-finite for some observation")
    return f


def fit_npmle(
    panel: NoisyPanel,
    grid: Optional[np.ndarray] = None,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
) -> NPMLEFit:
    """
    Fit grid-supported prior weights by EM.

    :param panel: estimates and their noise scales
    :param grid: candidate support points; ``build_grid(panel)`` when omitted
    :param tol: stop when the average log-likelihood moves by less than this
    :param max_iter: iteration cap; ``converged`` is False if it is reached
    """
    if len(panel) == 0:
        raise InvalidInputError("cannot fit a prior to an empty panel")
    if not tol > 0:
        raise InvalidConfigError(f"tol must be positive, got {tol}")
    grid = _check_grid(build_grid(panel) if grid is None else grid)

    y, sigma = panel.estimates, panel.noise_scales
    n, k = y.size, grid.size

    log_lik = log_gaussian(y[:, None], grid[None, :], sigma[:, None])
    shift = log_lik.max(axis=1)
    lik = np.exp(log_lik - shift[:, None])
    mean_shift = float(shift.mean())

    weights = np.full(k, 1.0 / k)
    f = _mixture_density(lik, weights)
    trace = [float(np.log(f).mean()) + mean_shift]

    converged = False
    iterations = 0
    for iterations in range(1, max_iter + 1):
        weights = weights * (lik.T @ (1.0 / f)) / n
        weights /= weights.sum()
        f = _mixture_density(lik, weights)
        trace.append(float(np.log(f).mean()) + mean_shift)

        if trace[-1] < trace[-2] - _MONOTONE_SLACK * max(1.0, abs(trace[-2])):
            logger.warning("npmle log-likelihood decreased iteration=%d delta=%.3e", iterations, trace[-1] - trace[-2])
        if abs(trace[-1] - trace[-2]) < tol:
            converged = True
            break

    gradient = (lik.T @ (1.0 / f)) / n
    residual = float(gradient.max() - 1.0)

    fit = NPMLEFit(
        prior=DiscretePrior(grid, weights),
        iterations=iterations,
        converged=converged,
        loglik_trace=tuple(trace),
        stationarity_residual=residual,
        n=n,
        grid_lower=float(grid[0]),
        grid_upper=float(grid[-1]),
    )
    if not converged:
        logger.warning("npmle hit max_iter=%d without converging loglik=%.9f", max_iter, fit.log_likelihood)
    elif not fit.certified:
        logger.debug("npmle stationarity residual=%.3e above %.0e", residual, STATIONARITY_TOL)
    logger.debug("npmle done n=%d grid=%d iterations=%d loglik=%.9f", n, k, iterations, fit.log_likelihood)
    return fit


def fit_prior(panel: NoisyPanel, config: NPMLEConfig = NPMLEConfig()) -> NPMLEFit:
    """ Build the grid described by ``config`` and run the EM fit """
    grid = build_grid(panel, config.grid_size, config.grid_spacing)
    return fit_npmle(panel, grid, tol=config.tol, max_iter=config.max_iter)


def average_log_likelihood(panel: NoisyPanel, prior: DiscretePrior) -> float:
    """ (1/n) sum_i log f_G(y_i) for any discrete prior """
    return float(np.mean(marginal_log_density(prior, panel.estimates, panel.noise_scales)))
