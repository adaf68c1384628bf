"""
Uniform interface over the allocation rules.

Every threshold rule is the projection of ``z - m`` onto the budget simplex
for some vector of income proxies m: the true incomes (full information),
the raw estimates (plug-in), or posterior means (oracle and empirical Bayes).
The shadow price lambda is always 2 * gamma from ``solve_budget_multiplier``,
so the threshold form and the projection coincide by construction.
"""
from __future__ import annotations

from dataclasses import dataclass, field
try:
    from enum import StrEnum
except ImportError:  # Python < 3.11
    from enum import Enum

    class StrEnum(str, Enum):
        __str__ = str.__str__
from types import MappingProxyType
from typing import Any, Mapping, Optional, Sequence

import numpy as np

from src.allocation.projection import TransferVector, solve_budget_multiplier
from src.allocation.shrinkage import james_stein_shrink
from src.data_pipline.models import NoisyPanel
from src.empirical_bayes.npmle import GridSpacing, NPMLEConfig, NPMLEFit, fit_prior
from src.empirical_bayes.posterior import posterior_mean
from src.empirical_bayes.prior import DiscretePrior
from src.empirical_bayes.truncated_normal import (
    TruncNormParams,
    fit_truncated_normal,
    truncated_normal_posterior_mean,
)
from src.utilities.errors import InvalidConfigError, InvalidInputError


class RuleKind(StrEnum):
    FULL_INFO = "full_info"
    PLUG_IN = "plug_in"
    JAMES_STEIN = "james_stein"
    ORACLE_BAYES = "oracle_bayes"
    EB_NPMLE = "eb_npmle"
    EB_TRUNCNORM = "eb_truncnorm"
    UBI = "ubi"


# option name -> parser, per rule kind
_OPTION_PARSERS: dict[RuleKind, dict[str, Any]] = {
    RuleKind.JAMES_STEIN: {"pooled_sigma": float},
    RuleKind.EB_NPMLE: {"grid_size": int, "tol": float, "max_iter": int, "grid_spacing": GridSpacing},
}


@dataclass(frozen=True)
class PolicyContext:
    """ Poverty line z and budget B """

    poverty_line: float
    budget: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "poverty_line", float(self.poverty_line))
        object.__setattr__(self, "budget", float(self.budget))
        if not np.isfinite(self.poverty_line):
            raise InvalidInputError("poverty_line must be finite")
        if not (np.isfinite(self.budget) and self.budget > 0):
            raise InvalidInputError(f"budget must be positive, got {self.budget}")


@dataclass(frozen=True)
class RuleSpec:
    """
    A rule kind plus its options. Option values may arrive as strings from a
    config file; they are parsed here and unknown options are rejected.
    """

    kind: RuleKind
    options: Mapping[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        try:
            kind = RuleKind(self.kind)
        except ValueError:
            raise InvalidConfigError(f"unknown rule {self.kind!r}; expected one of {[k.value for k in RuleKind]}")

        parsers = _OPTION_PARSERS.get(kind, {})
        parsed: dict[str, Any] = {}
        for key, value in dict(self.options).items():
            if key not in parsers:
                raise InvalidConfigError(f"rule {kind.value} has no option {key!r}")
            try:
                parsed[key] = parsers[key](value)
            except (TypeError, ValueError):
                raise InvalidConfigError(f"rule {kind.value} option {key}={value!r} is not a valid {parsers[key].__name__}")

        if "pooled_sigma" in parsed and not parsed["pooled_sigma"] > 0:
            raise InvalidConfigError("james_stein pooled_sigma must be positive")

        object.__setattr__(self, "kind", kind)
        object.__setattr__(self, "options", MappingProxyType(parsed))

    @property
    def name(self) -> str:
        return self.kind.value

    def npmle_config(self) -> NPMLEConfig:
        return NPMLEConfig(**self.options) if self.kind is RuleKind.EB_NPMLE else NPMLEConfig()


@dataclass(frozen=True)
class RuleResult:
    """ Transfers plus the bookkeeping the evaluation and CLI layers report """

    rule: str
    transfers: TransferVector
    multiplier: Optional[float] = None
    shrink_factor: Optional[float] = None
    prior_fit: Optional[NPMLEFit] = None
    trunc_params: Optional[TruncNormParams] = None

    @property
    def shadow_price(self) -> Optional[float]:
        return None if self.multiplier is None else 2.0 * self.multiplier

    @property
    def spend(self) -> float:
        return self.transfers.spend

    @property
    def active_count(self) -> int:
        return self.transfers.active_count

    @property
    def budget_slack(self) -> bool:
        """ True when the rule left part of the budget unspent """
        return self.spend < self.transfers.budget * (1.0 - 1e-9)


def _threshold_allocation(proxies: Sequence[float] | np.ndarray, ctx: PolicyContext) -> tuple[TransferVector, float]:
    gaps = ctx.poverty_line - np.asarray(proxies, dtype=float)
    gamma = solve_budget_multiplier(gaps, ctx.budget)
    return TransferVector(np.maximum(gaps - gamma, 0.0), ctx.budget), gamma


def full_info_rule(incomes: Sequence[float] | np.ndarray, ctx: PolicyContext) -> TransferVector:
    """ The full-information optimum: projection of z - y onto the budget simplex """
    return _threshold_allocation(incomes, ctx)[0]


def plug_in_rule(panel: NoisyPanel, ctx: PolicyContext) -> TransferVector:
    """ Treat the estimates as true incomes """
    return _threshold_allocation(panel.estimates, ctx)[0]


def james_stein_rule(panel: NoisyPanel, ctx: PolicyContext, pooled_sigma: float) -> TransferVector:
    """ Plug-in transfers shrunk by the truncated James-Stein factor for a common sigma """
    return james_stein_shrink(plug_in_rule(panel, ctx), pooled_sigma).transfers


def bayes_rule_from_means(posterior_means: Sequence[float] | np.ndarray, ctx: PolicyContext) -> TransferVector:
    """ t_i = max(0, z - m_i - lambda / 2), with lambda the smallest price that keeps spending within B """
    return _threshold_allocation(posterior_means, ctx)[0]


def oracle_bayes_rule(panel: NoisyPanel, true_prior: DiscretePrior, ctx: PolicyContext) -> TransferVector:
    """ Bayes rule under the true mixing distribution """
    means = posterior_mean(true_prior, panel.estimates, panel.noise_scales)
    return bayes_rule_from_means(means, ctx)


def eb_rule(panel: NoisyPanel, ctx: PolicyContext, npmle_config: NPMLEConfig = NPMLEConfig()) -> TransferVector:
    """ Fit the prior by NPMLE on the same panel, then apply the Bayes rule """
    return _eb_npmle(panel, ctx, npmle_config)[0]


def _eb_npmle(panel: NoisyPanel, ctx: PolicyContext, config: NPMLEConfig) -> tuple[TransferVector, float, NPMLEFit]:
    fit = fit_prior(panel, config)
    means = posterior_mean(fit.prior, panel.estimates, panel.noise_scales)
    transfers, gamma = _threshold_allocation(means, ctx)
    return transfers, gamma, fit


def eb_truncnorm_rule(panel: NoisyPanel, ctx: PolicyContext) -> TransferVector:
    """ Bayes rule under a fitted truncated-normal prior """
    return _eb_truncnorm(panel, ctx)[0]


def _eb_truncnorm(panel: NoisyPanel, ctx: PolicyContext) -> tuple[TransferVector, float, TruncNormParams]:
    # rescale to unit noise with the pooled sigma; truncation at zero is scale-free
    scale = panel.pooled_sigma
    unit_panel = panel.unit_noise()
    params = fit_truncated_normal(unit_panel)
    means = scale * np.asarray(truncated_normal_posterior_mean(params, unit_panel.estimates))
    transfers, gamma = _threshold_allocation(means, ctx)
    return transfers, gamma, params


def ubi_rule(n: int, ctx: PolicyContext) -> TransferVector:
    """ B / n to every household """
    if n < 1:
        raise InvalidInputError(f"ubi needs at least one household, got n={n}")
    return TransferVector(np.full(n, ctx.budget / n), ctx.budget)


def apply_rule(
    spec: RuleSpec,
    panel: NoisyPanel,
    ctx: PolicyContext,
    *,
    true_prior: Optional[DiscretePrior] = None,
    true_incomes: Optional[np.ndarray] = None,
    pooled_sigma: Optional[float] = None,
) -> RuleResult:
    """
    Run one rule and collect its metadata.

    :param spec: which rule, with options
    :param panel: the noisy panel
    :param ctx: poverty line and budget
    :param true_prior: required by ``oracle_bayes``
    :param true_incomes: required by ``full_info``
    :param pooled_sigma: James-Stein sigma when the RuleSpec does not set one;
        falls back to the panel's pooled sigma
    """
    kind = spec.kind
    if kind is RuleKind.FULL_INFO:
        if true_incomes is None:
            raise InvalidInputError("full_info requires true incomes")
        transfers, gamma = _threshold_allocation(true_incomes, ctx)
        return RuleResult(spec.name, transfers, multiplier=gamma)

    if kind is RuleKind.PLUG_IN:
        transfers, gamma = _threshold_allocation(panel.estimates, ctx)
        return RuleResult(spec.name, transfers, multiplier=gamma)

    if kind is RuleKind.JAMES_STEIN:
        sigma = spec.options.get("pooled_sigma", pooled_sigma if pooled_sigma is not None else panel.pooled_sigma)
        plug_in, gamma = _threshold_allocation(panel.estimates, ctx)
        outcome = james_stein_shrink(plug_in, sigma)
        return RuleResult(spec.name, outcome.transfers, multiplier=gamma, shrink_factor=outcome.factor)

    if kind is RuleKind.ORACLE_BAYES:
        if true_prior is None:
            raise InvalidInputError("oracle_bayes requires the true prior")
        means = posterior_mean(true_prior, panel.estimates, panel.noise_scales)
        transfers, gamma = _threshold_allocation(means, ctx)
        return RuleResult(spec.name, transfers, multiplier=gamma)

    if kind is RuleKind.EB_NPMLE:
        transfers, gamma, fit = _eb_npmle(panel, ctx, spec.npmle_config())
        return RuleResult(spec.name, transfers, multiplier=gamma, prior_fit=fit)

    if kind is RuleKind.EB_TRUNCNORM:
        transfers, gamma, params = _eb_truncnorm(panel, ctx)
        return RuleResult(spec.name, transfers, multiplier=gamma, trunc_params=params)

    return RuleResult(spec.name, ubi_rule(len(panel), ctx))
