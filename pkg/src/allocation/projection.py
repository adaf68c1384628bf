"""
Exact solution of the full-information allocation problem.

Minimizing the average squared poverty gap under a budget is the Euclidean
projection of the gap vector onto the budget simplex
``{tau >= 0, sum(tau) <= budget}``. Three characterizations are exposed and
agree to rounding:

    - ``project_to_budget_simplex``: the projection itself,
    - ``threshold_transfers``: the KKT form ``max(0, gap - shadow_price / 2)``,
    - ``leveling_up``: lift the poorest households to a common level.

All functions are pure; nothing here holds state.
"""
from __future__ import annotations

from dataclasses import dataclass
try:
    from enum import StrEnum
except ImportError:  # Python < 3.11
    from enum import Enum

    class StrEnum(str, Enum):
        __str__ = str.__str__
from typing import Sequence

import numpy as np

from src.utilities.errors import InvalidInputError

FEASIBILITY_SLACK: float = 1e-9
_BISECTION_TOL: float = 1e-12
_BISECTION_MAX_ITER: int = 500


class MultiplierMethod(StrEnum):
    SORT = "sort"
    BISECTION = "bisection"


def _as_finite_vector(values: Sequence[float] | np.ndarray, name: str) -> np.ndarray:
    arr = np.asarray(values, dtype=float).reshape(-1)
    if arr.size == 0:
        raise InvalidInputError(f"{name} must contain at least one entry")
    if not np.all(np.isfinite(arr)):
        raise InvalidInputError(f"{name} must be finite")
    return arr


def _check_budget(budget: float) -> float:
    budget = float(budget)
    if not np.isfinite(budget) or budget <= 0:
        raise InvalidInputError(f"budget must be a positive real, got {budget}")
    return budget


@dataclass(frozen=True)
class TransferVector:
    """
    A nonnegative allocation spending at most the budget.

    Spending may exceed the budget by FEASIBILITY_SLACK in absolute terms for
    budgets up to one, and by FEASIBILITY_SLACK * budget above that.
    """

    transfers: np.ndarray
    budget: float

    def __post_init__(self) -> None:
        transfers = np.array(self.transfers, dtype=float).reshape(-1)
        transfers.setflags(write=False)
        object.__setattr__(self, "transfers", transfers)
        object.__setattr__(self, "budget", _check_budget(self.budget))

        if not np.all(np.isfinite(transfers)):
            raise InvalidInputError("transfers must be finite")
        if np.any(transfers < 0):
            raise InvalidInputError("transfers must be nonnegative")
        if transfers.sum() > self.budget + FEASIBILITY_SLACK * max(1.0, self.budget):
            raise InvalidInputError(f"transfers spend {transfers.sum()} above budget {self.budget}")

    def __len__(self) -> int:
        return self.transfers.size

    @property
    def spend(self) -> float:
        return float(self.transfers.sum())

    @property
    def active_count(self) -> int:
        return int(np.count_nonzero(self.transfers > 0))

    @property
    def squared_norm(self) -> float:
        return float(self.transfers @ self.transfers)

    def scaled(self, factor: float) -> TransferVector:
        return TransferVector(self.transfers * factor, self.budget)


@dataclass(frozen=True)
class LevelingResult:
    """
    Outcome of the leveling-up procedure.

    ``cutoff_index`` is the 1-based position p of the last household at or
    below ``level`` in the sorted incomes; households after p receive nothing.
    """

    transfers: TransferVector
    cutoff_index: int
    level: float


def solve_budget_multiplier(
    values: Sequence[float] | np.ndarray,
    budget: float,
    method: MultiplierMethod = MultiplierMethod.SORT,
) -> float:
    """
    Return the unique gamma >= 0 with sum(max(0, v - gamma)) = min(budget, sum(max(0, v))).

    The sort-based search is exact; bisection is kept for callers that cannot
    afford a sort and bounds the spending residual by 1e-12.

    :param values: gaps (or any reals); nonpositive entries never receive anything
    :param budget: positive budget
    :param method: ``sort`` (default) or ``bisection``
    """
    v = _as_finite_vector(values, "values")
    budget = _check_budget(budget)

    positive = v[v > 0]
    if positive.sum() <= budget:
        return 0.0

    if MultiplierMethod(method) is MultiplierMethod.BISECTION:
        return _bisect_multiplier(positive, budget)

    u = np.sort(positive)[::-1]
    candidates = (np.cumsum(u) - budget) / np.arange(1, u.size + 1)
    rho = np.nonzero(u > candidates)[0][-1]
    return float(max(candidates[rho], 0.0))


def _bisect_multiplier(positive: np.ndarray, budget: float) -> float:
    lo, hi = 0.0, float(positive.max())
    for _ in range(_BISECTION_MAX_ITER):
        mid = 0.5 * (lo + hi)
        spent = np.maximum(positive - mid, 0.0).sum()
        if abs(spent - budget) <= _BISECTION_TOL or hi - lo <= np.finfo(float).eps * max(1.0, hi):
            return mid
        if spent > budget:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def threshold_transfers(gaps: Sequence[float] | np.ndarray, shadow_price: float) -> np.ndarray:
    """ KKT form of the optimum: max(0, gap - shadow_price / 2) componentwise """
    g = np.asarray(gaps, dtype=float)
    return np.maximum(g - 0.5 * shadow_price, 0.0)


def project_to_budget_simplex(gaps: Sequence[float] | np.ndarray, budget: float) -> TransferVector:
    """
    Euclidean projection of the gap vector onto {tau >= 0, sum(tau) <= budget}.

    When the positive gaps fit in the budget they are returned exactly and the
    remainder of the budget is left unspent. Gaps equal to the threshold get zero.
    """
    g = _as_finite_vector(gaps, "gaps")
    budget = _check_budget(budget)
    gamma = solve_budget_multiplier(g, budget)
    return TransferVector(np.maximum(g - gamma, 0.0), budget)


def leveling_up(incomes: Sequence[float] | np.ndarray, poverty_line: float, budget: float) -> LevelingResult:
    """
    Progressive leveling-up: raise the poorest households to a common level.

    Scans p = 1, 2, ... and computes the level that exhausts the budget over the
    p poorest households, stopping at the first p whose level falls strictly
    below the next income (or below the poverty line when every poor household
    is already included). If the budget covers the whole poverty gap, everyone
    poor is lifted exactly to the line.

    :param incomes: incomes sorted ascending; unsorted input is rejected
    :param poverty_line: z
    :param budget: positive budget
    """
    y = _as_finite_vector(incomes, "incomes")
    budget = _check_budget(budget)
    z = float(poverty_line)
    if np.any(np.diff(y) < 0):
        raise InvalidInputError("incomes must be sorted ascending; use leveling_up_unsorted")

    poor = int(np.count_nonzero(y < z))
    total_gap = float(np.sum(z - y[:poor]))

    if total_gap <= budget:
        level = z
    else:
        levels = (budget + np.cumsum(y[:poor])) / np.arange(1, poor + 1)
        next_income = np.append(y[1:poor], z)
        stop = np.nonzero(levels < next_income)[0][0]
        level = float(levels[stop])

    cutoff = int(np.searchsorted(y, level, side="right"))
    transfers = np.zeros_like(y)
    transfers[:cutoff] = np.maximum(level - y[:cutoff], 0.0)
    return LevelingResult(TransferVector(transfers, budget), cutoff, level)


def leveling_up_unsorted(incomes: Sequence[float] | np.ndarray, poverty_line: float, budget: float) -> TransferVector:
    """ Sort, level up, and map the transfers back to the caller's order """
    y = _as_finite_vector(incomes, "incomes")
    order = np.argsort(y, kind="stable")
    result = leveling_up(y[order], poverty_line, budget)
    transfers = np.empty_like(y)
    transfers[order] = result.transfers.transfers
    return TransferVector(transfers, result.transfers.budget)
