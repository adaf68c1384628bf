"""
Experiment configuration objects.

``SimConfig`` parameterizes one experiment at one SNR level. Income sources
are either a synthetic ``IncomeSpec`` or an ``ExternalIncomeSource`` naming a
panel file whose ``y_true`` column supplies the fixed incomes.
"""
from __future__ import annotations

from dataclasses import dataclass, field
try:
    from enum import StrEnum
except ImportError:  # Python < 3.11
    from enum import Enum

    class StrEnum(str, Enum):
        __str__ = str.__str__
from pathlib import Path
from types import MappingProxyType
from typing import Any, Mapping, Optional

from src.evaluation.metrics import LossKind
from src.rules.decision_rules import RuleSpec
from src.utilities.errors import InvalidConfigError


class IncomeFamily(StrEnum):
    LOGNORMAL = "lognormal"
    TRUNCNORM_MIXTURE = "truncnorm_mixture"
    TWO_POINT = "two_point"
    DISCRETE = "discrete"


class EvaluationTarget(StrEnum):
    REALIZED = "realized"
    CONDITIONAL_MEAN = "conditional_mean"


def _float_list(value: Any) -> tuple[float, ...]:
    if isinstance(value, str):
        value = [part for part in value.split(",") if part.strip()]
    if isinstance(value, (int, float)):
        value = [value]
    return tuple(float(v) for v in value)


# family -> {parameter: (parser, default)}; a default of None marks a required parameter
_FAMILY_PARAMS: dict[IncomeFamily, dict[str, tuple[Any, Any]]] = {
    IncomeFamily.LOGNORMAL: {"meanlog": (float, 0.0), "sdlog": (float, 1.0), "scale": (float, 1.0)},
    IncomeFamily.TRUNCNORM_MIXTURE: {
        "means": (_float_list, None),
        "sds": (_float_list, None),
        "weights": (_float_list, None),
    },
    IncomeFamily.TWO_POINT: {"low": (float, 3.0), "high": (float, 9.0), "p_low": (float, 0.5)},
    IncomeFamily.DISCRETE: {"support": (_float_list, None), "weights": (_float_list, None)},
}


@dataclass(frozen=True)
class IncomeSpec:
    """ A synthetic income family, its parameters, the population size and an optional seed """

    family: IncomeFamily
    n: int
    params: Mapping[str, Any] = field(default_factory=dict)
    seed: Optional[int] = None

    def __post_init__(self) -> None:
        try:
            family = IncomeFamily(self.family)
        except ValueError:
            raise InvalidConfigError(
                f"unknown income family {self.family!r}; expected one of {[f.value for f in IncomeFamily]}"
            )
        if self.n < 1:
            raise InvalidConfigError(f"income population size must be positive, got {self.n}")

        schema = _FAMILY_PARAMS[family]
        unknown = set(self.params) - set(schema)
        if unknown:
            raise InvalidConfigError(f"income family {family.value} has no parameter(s) {sorted(unknown)}")

        parsed: dict[str, Any] = {}
        for name, (parser, default) in schema.items():
            if name not in self.params:
                if default is None:
                    raise InvalidConfigError(f"income family {family.value} requires parameter {name!r}")
                parsed[name] = default
                continue
            try:
                parsed[name] = parser(self.params[name])
            except (TypeError, ValueError):
                raise InvalidConfigError(f"income parameter {name}={self.params[name]!r} is malformed")

        object.__setattr__(self, "family", family)
        object.__setattr__(self, "params", MappingProxyType(parsed))


@dataclass(frozen=True)
class ExternalIncomeSource:
    """ Panel file with a ``y_true`` column """

    path: Path


@dataclass(frozen=True)
class SimConfig:
    """ One experiment at one SNR level """

    snr_target: float
    replications: int
    seed: int
    rules: tuple[RuleSpec, ...]
    income_source: IncomeSpec | ExternalIncomeSource
    budget_fraction: float = 0.1
    poverty_quantile: float = 0.5
    income_noise_sd: float = 0.0
    loss: LossKind = LossKind.SQUARED
    evaluate_against: EvaluationTarget = EvaluationTarget.REALIZED
    workers: Optional[int] = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "rules", tuple(self.rules))
        object.__setattr__(self, "loss", LossKind(self.loss))
        object.__setattr__(self, "evaluate_against", EvaluationTarget(self.evaluate_against))

        if not self.snr_target > 0:
            raise InvalidConfigError(f"snr_target must be positive, got {self.snr_target}")
        if self.replications < 1:
            raise InvalidConfigError(f"replications must be at least 1, got {self.replications}")
        if not 0 < self.budget_fraction <= 1:
            raise InvalidConfigError(f"budget_fraction must lie in (0, 1], got {self.budget_fraction}")
        if not 0 < self.poverty_quantile < 1:
            raise InvalidConfigError(f"poverty_quantile must lie in (0, 1), got {self.poverty_quantile}")
        if self.income_noise_sd < 0:
            raise InvalidConfigError("income_noise_sd must be nonnegative")
        if not self.rules:
            raise InvalidConfigError("at least one rule is required")
        if self.workers is not None and self.workers < 1:
            raise InvalidConfigError("workers must be positive")
        if not 0 <= self.seed < 2**64:
            raise InvalidConfigError("seed must be a 64-bit unsigned integer")
