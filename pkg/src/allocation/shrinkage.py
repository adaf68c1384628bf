"""
James-Stein-type correction of plug-in transfers.

The plug-in allocation is rescaled by the truncated factor
``1 - sigma^2 (s - 3) / ||tau||^2`` where s counts positive transfers. The
factor is applied only when it lies strictly inside (0, 1), so the result
stays in the action space.

``divergence_g`` and ``stein_risk_difference_sample`` are diagnostics used by
the test suite to check the dominance argument; they are not allocation rules.
"""
from __future__ import annotations

from dataclasses import dataclass

from src.allocation.projection import TransferVector
from src.utilities.errors import InvalidInputError, UndefinedMetricError


@dataclass(frozen=True)
class ShrinkageOutcome:
    transfers: TransferVector
    factor: float
    active_count: int


def _check_noise_scale(noise_scale: float) -> float:
    noise_scale = float(noise_scale)
    if not noise_scale > 0:
        raise InvalidInputError(f"noise_scale must be positive, got {noise_scale}")
    return noise_scale


def raw_shrinkage_factor(plug_in: TransferVector, noise_scale: float) -> float:
    """ Untruncated factor; undefined (nan) for the zero vector """
    norm_sq = plug_in.squared_norm
    if norm_sq == 0:
        return float("nan")
    return 1.0 - noise_scale**2 * (plug_in.active_count - 3) / norm_sq


def james_stein_shrink(plug_in: TransferVector, noise_scale: float) -> ShrinkageOutcome:
    """
    Shrink a plug-in allocation toward zero.

    Falls back to the unchanged input when s <= 3, when the raw factor is
    outside (0, 1), or when the input is the zero vector.

    :param plug_in: feasible plug-in transfers
    :param noise_scale: the common (pooled) noise standard deviation sigma
    """
    noise_scale = _check_noise_scale(noise_scale)
    s = plug_in.active_count
    raw = raw_shrinkage_factor(plug_in, noise_scale)

    if s <= 3 or not 0.0 < raw < 1.0:
        return ShrinkageOutcome(plug_in, 1.0, s)
    return ShrinkageOutcome(plug_in.scaled(raw), raw, s)


def divergence_g(plug_in: TransferVector, budget: float) -> float:
    """
    Divergence of g(X) = tau(X) / ||tau(X)||^2 on a region where the active set is fixed.

    Returns (s - 3) / ||tau||^2 + 2 B^2 / (s ||tau||^4). The closed form
    assumes the budget binds (sum(tau) = B), which holds on every region where
    the plug-in rule spends the full budget.
    """
    norm_sq = plug_in.squared_norm
    s = plug_in.active_count
    if norm_sq == 0 or s == 0:
        raise UndefinedMetricError("divergence of g is undefined at the zero allocation")
    return (s - 3) / norm_sq + 2.0 * float(budget) ** 2 / (s * norm_sq**2)


def stein_risk_difference_sample(
    plug_in: TransferVector,
    noise_scale: float,
    budget: float,
    multiplier: float = 0.0,
) -> float:
    """
    Single-draw estimate of R(tau_JS) - R(tau_plug) on a region with a fixed active set.

    On the shrinkage event {s > 3, 0 < sigma^2 (s - 3) < ||tau||^2} returns
    -sigma^4 [(s - 3)^2 / ||tau||^2 + 4 B^2 (s - 3) / (s ||tau||^4)], else 0.

    That is the Stein part alone. When the budget binds the projection residual
    X - tau equals gamma on the active set, so (X - tau)'tau = gamma B and the
    exact difference gains 2 sigma^2 (s - 3) gamma B / ||tau||^2. Pass the plug-in
    threshold gamma as ``multiplier`` to include it; with the default 0 the
    result is the Stein term.

    :param multiplier: plug-in threshold gamma from ``solve_budget_multiplier``
    """
    noise_scale = _check_noise_scale(noise_scale)
    s = plug_in.active_count
    norm_sq = plug_in.squared_norm
    variance = noise_scale**2

    if s <= 3 or not 0.0 < variance * (s - 3) < norm_sq:
        return 0.0
    budget = float(budget)
    stein = -(variance**2) * ((s - 3) ** 2 / norm_sq + 4.0 * budget**2 * (s - 3) / (s * norm_sq**2))
    return stein + 2.0 * variance * (s - 3) * float(multiplier) * budget / norm_sq
