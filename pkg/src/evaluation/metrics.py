"""
Performance metrics for transfer allocations.

Losses are averages over households of the squared post-transfer poverty gap
``(z - y_i - tau_i)^2``; the one-sided variant only counts households left
below the line. A household "receives a transfer" when tau_i > 1e-9.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass
try:
    from enum import StrEnum
except ImportError:  # Python < 3.11
    from enum import Enum

    class StrEnum(str, Enum):
        __str__ = str.__str__
from typing import Sequence

import numpy as np

from src.allocation.projection import TransferVector, project_to_budget_simplex
from src.utilities.errors import InvalidInputError, UndefinedMetricError

RECIPIENT_THRESHOLD: float = 1e-9
_DEGENERATE_DENOMINATOR: float = 1e-15


class LossKind(StrEnum):
    SQUARED = "squared"
    ONE_SIDED = "one_sided"


@dataclass(frozen=True)
class TargetingErrors:
    inclusion_error: float
    exclusion_error: float
    reach: float
    avg_transfer_given_positive: float
    no_recipients: bool


@dataclass(frozen=True)
class MetricsReport:
    loss: float
    loss_ratio: float
    inclusion_error: float
    exclusion_error: float
    reach: float
    avg_transfer_given_positive: float
    spend: float
    no_recipients: bool = False

    def as_dict(self) -> dict[str, float | bool]:
        return asdict(self)


@dataclass(frozen=True)
class RegretEstimate:
    """ Mean paired loss difference and its Monte-Carlo standard error """

    mean: float
    std_error: float
    replications: int


def _as_arrays(transfers: TransferVector | Sequence[float] | np.ndarray, incomes) -> tuple[np.ndarray, np.ndarray]:
    tau = transfers.transfers if isinstance(transfers, TransferVector) else np.asarray(transfers, dtype=float)
    y = np.asarray(incomes, dtype=float)
    if tau.shape != y.shape:
        raise InvalidInputError(f"{tau.size} transfers for {y.size} incomes")
    if tau.size == 0:
        raise InvalidInputError("cannot evaluate an empty allocation")
    return tau, y


def squared_gap_loss(transfers, incomes, poverty_line: float) -> float:
    """ (1/n) sum (z - y_i - tau_i)^2 """
    tau, y = _as_arrays(transfers, incomes)
    return float(np.mean((poverty_line - y - tau) ** 2))


def one_sided_loss(transfers, incomes, poverty_line: float) -> float:
    """ (1/n) sum max(0, z - y_i - tau_i)^2; overshooting the line costs nothing """
    tau, y = _as_arrays(transfers, incomes)
    return float(np.mean(np.maximum(poverty_line - y - tau, 0.0) ** 2))


def loss_function(kind: LossKind | str):
    return one_sided_loss if LossKind(kind) is LossKind.ONE_SIDED else squared_gap_loss


def loss_ratio(transfers, incomes, poverty_line: float, budget: float, loss: LossKind = LossKind.SQUARED) -> float:
    """
    (L(tau) - L(0)) / (L(tau*) - L(0)) with tau* the full-information optimum.

    1 means full-information performance, 0 no better than no transfers, and a
    negative value means the allocation made poverty worse.
    """
    tau, y = _as_arrays(transfers, incomes)
    loss_fn = loss_function(loss)
    optimum = project_to_budget_simplex(poverty_line - y, budget)

    baseline = loss_fn(np.zeros_like(y), y, poverty_line)
    denominator = loss_fn(optimum, y, poverty_line) - baseline
    if abs(denominator) <= _DEGENERATE_DENOMINATOR * max(1.0, baseline):
        raise UndefinedMetricError("loss ratio undefined: the full-information optimum does not reduce the loss")
    return float((loss_fn(tau, y, poverty_line) - baseline) / denominator)


def targeting_errors(transfers, incomes, poverty_line: float) -> TargetingErrors:
    """
    Inclusion error: share of recipients who are not poor (0 with
    ``no_recipients`` set when nobody receives anything). Exclusion error:
    share of poor households receiving nothing (0 when nobody is poor).
    """
    tau, y = _as_arrays(transfers, incomes)
    recipient = tau > RECIPIENT_THRESHOLD
    poor = y < poverty_line

    recipients = int(recipient.sum())
    poor_count = int(poor.sum())

    inclusion = float(np.count_nonzero(recipient & ~poor) / recipients) if recipients else 0.0
    exclusion = float(np.count_nonzero(~recipient & poor) / poor_count) if poor_count else 0.0
    avg_transfer = float(tau[recipient].mean()) if recipients else 0.0

    return TargetingErrors(
        inclusion_error=inclusion,
        exclusion_error=exclusion,
        reach=recipients / tau.size,
        avg_transfer_given_positive=avg_transfer,
        no_recipients=recipients == 0,
    )


def evaluate_allocation(
    transfers: TransferVector,
    incomes,
    poverty_line: float,
    loss: LossKind = LossKind.SQUARED,
) -> MetricsReport:
    """ Full report for one allocation against one income vector """
    tau, y = _as_arrays(transfers, incomes)
    errors = targeting_errors(tau, y, poverty_line)
    return MetricsReport(
        loss=loss_function(loss)(tau, y, poverty_line),
        loss_ratio=loss_ratio(tau, y, poverty_line, transfers.budget, loss),
        inclusion_error=errors.inclusion_error,
        exclusion_error=errors.exclusion_error,
        reach=errors.reach,
        avg_transfer_given_positive=errors.avg_transfer_given_positive,
        spend=transfers.spend,
        no_recipients=errors.no_recipients,
    )


def bayes_regret_estimate(rule_losses: Sequence[float], oracle_losses: Sequence[float]) -> RegretEstimate:
    """ Paired mean of rule_loss - oracle_loss over replications, with its standard error """
    rule = np.asarray(rule_losses, dtype=float)
    oracle = np.asarray(oracle_losses, dtype=float)
    if rule.shape != oracle.shape:
        raise InvalidInputError(f"{rule.size} rule losses but {oracle.size} oracle losses")
    if rule.size == 0:
        raise InvalidInputError("regret needs at least one replication")

    diff = rule - oracle
    std_error = float(diff.std(ddof=1) / np.sqrt(diff.size)) if diff.size > 1 else 0.0
    return RegretEstimate(float(diff.mean()), std_error, int(diff.size))


def paired_win_rate(ratios_a: Sequence[float], ratios_b: Sequence[float]) -> float:
    """ Share of replications in which rule a strictly beats rule b """
    a = np.asarray(ratios_a, dtype=float)
    b = np.asarray(ratios_b, dtype=float)
    if a.shape != b.shape or a.size == 0:
        raise InvalidInputError("win rate needs two nonempty paired sequences")
    return float(np.mean(a > b))
