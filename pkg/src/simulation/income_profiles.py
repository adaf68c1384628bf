"""
Fixed income populations for the experiments.

Synthetic families stand in for survey consumption data. Each profile holds
the fixed conditional means mu and, when it can be written down, the true
mixing distribution used by the oracle rule: the exact prior for discrete
families and the empirical distribution of the fixed mu otherwise.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.stats import truncnorm

from src.data_pipline.panel_intake import ingest_panel
from src.empirical_bayes.prior import DiscretePrior
from src.simulation.config import ExternalIncomeSource, IncomeFamily, IncomeSpec
from src.utilities.errors import InvalidConfigError, InvalidInputError


@dataclass(frozen=True)
class IncomeProfile:
    mu: np.ndarray
    true_prior: Optional[DiscretePrior]
    source: str

    def __len__(self) -> int:
        return self.mu.size


def _discrete_prior(support: tuple[float, ...], weights: tuple[float, ...]) -> DiscretePrior:
    if len(support) != len(weights):
        raise InvalidConfigError("discrete family needs as many weights as support points")
    order = np.argsort(support)
    try:
        return DiscretePrior(np.asarray(support)[order], np.asarray(weights)[order])
    except InvalidInputError as e:
        raise InvalidConfigError(f"discrete income family: {e}")


def _truncnorm_mixture(params, n: int, rng: np.random.Generator) -> np.ndarray:
    means, sds, weights = (np.asarray(params[k], dtype=float) for k in ("means", "sds", "weights"))
    if not means.size == sds.size == weights.size:
        raise InvalidConfigError("truncnorm_mixture needs equally many means, sds and weights")
    if np.any(sds <= 0) or np.any(weights < 0) or abs(weights.sum() - 1.0) > 1e-10:
        raise InvalidConfigError("truncnorm_mixture needs positive sds and weights summing to one")

    component = rng.choice(means.size, size=n, p=weights)
    mu = np.empty(n)
    for k in range(means.size):
        members = component == k
        lower = (0.0 - means[k]) / sds[k]
        mu[members] = truncnorm.rvs(
            lower, np.inf, loc=means[k], scale=sds[k], size=int(members.sum()), random_state=rng
        )
    return mu


def synthetic_income_generator(spec: IncomeSpec, seed: Optional[int | np.random.SeedSequence] = None) -> IncomeProfile:
    """
    Draw n nonnegative conditional means from ``spec.family``.

    :param spec: family, parameters and size; ``spec.seed`` wins over ``seed``
    :param seed: fallback seed (or seed sequence) when the IncomeSpec carries none
    """
    rng = np.random.default_rng(spec.seed if spec.seed is not None else (seed if seed is not None else 0))
    params, n = spec.params, spec.n

    if spec.family is IncomeFamily.LOGNORMAL:
        mu = params["scale"] * rng.lognormal(params["meanlog"], params["sdlog"], size=n)
        return IncomeProfile(mu, DiscretePrior.from_sample(mu), spec.family.value)

    if spec.family is IncomeFamily.TRUNCNORM_MIXTURE:
        mu = _truncnorm_mixture(params, n, rng)
        return IncomeProfile(mu, DiscretePrior.from_sample(mu), spec.family.value)

    if spec.family is IncomeFamily.TWO_POINT:
        prior = _discrete_prior((params["low"], params["high"]), (params["p_low"], 1.0 - params["p_low"]))
    else:
        prior = _discrete_prior(params["support"], params["weights"])
    return IncomeProfile(prior.sample(n, rng), prior, spec.family.value)


def load_income_profile(
    source: IncomeSpec | ExternalIncomeSource,
    seed: Optional[int | np.random.SeedSequence] = None,
) -> IncomeProfile:
    """ Synthetic draw, or the ``y_true`` column of an external panel file (no known prior) """
    if isinstance(source, IncomeSpec):
        return synthetic_income_generator(source, seed)

    household = ingest_panel(source.path)
    if not household.has_true_incomes:
        raise InvalidConfigError(f"income_file {source.path} has no y_true column")
    return IncomeProfile(np.asarray(household.true_incomes), None, str(source.path))
