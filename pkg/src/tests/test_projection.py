""" Test the full-information allocation: projection, budget multiplier and leveling-up """
import itertools

import numpy as np
import pytest

from src.allocation.projection import (
    MultiplierMethod,
    TransferVector,
    leveling_up,
    leveling_up_unsorted,
    project_to_budget_simplex,
    solve_budget_multiplier,
    threshold_transfers,
)
from src.utilities.errors import InvalidInputError


def _brute_force_projection(gaps: np.ndarray, budget: float) -> np.ndarray:
    """ Enumerate every active set, with the budget binding or slack, and keep the closest feasible point """
    n = gaps.size
    best, best_distance = np.zeros(n), float(gaps @ gaps)
    for size in range(1, n + 1):
        for active in itertools.combinations(range(n), size):
            idx = list(active)
            for binding in (False, True):
                tau = np.zeros(n)
                tau[idx] = gaps[idx] - (gaps[idx].sum() - budget) / size if binding else gaps[idx]
                if np.any(tau < -1e-12) or tau.sum() > budget + 1e-12:
                    continue
                distance = float(((gaps - tau) ** 2).sum())
                if distance < best_distance:
                    best, best_distance = np.maximum(tau, 0.0), distance
    return best


def test_worked_example_projection():
    result = project_to_budget_simplex([80.0, 65.0, 55.0, 40.0, 0.0], 100.0)
    np.testing.assert_allclose(result.transfers, [45.0, 30.0, 20.0, 5.0, 0.0], atol=1e-12)
    assert result.spend == pytest.approx(100.0)
    assert result.active_count == 4


@pytest.mark.parametrize("method", list(MultiplierMethod))
def test_worked_example_multiplier(method):
    assert solve_budget_multiplier([80.0, 65.0, 55.0, 40.0, 0.0], 100.0, method) == pytest.approx(35.0, abs=1e-9)


def test_nonpositive_gaps_get_nothing():
    result = project_to_budget_simplex([-3.0, 0.0, -10.0], 5.0)
    np.testing.assert_array_equal(result.transfers, [0.0, 0.0, 0.0])
    assert solve_budget_multiplier([-3.0, -1.0], 5.0) == 0.0


def test_slack_budget_returns_positive_parts_exactly():
    result = project_to_budget_simplex([4.0, -1.0, 2.5], 100.0)
    np.testing.assert_array_equal(result.transfers, [4.0, 0.0, 2.5])
    assert solve_budget_multiplier([4.0, -1.0, 2.5], 100.0) == 0.0


@pytest.mark.parametrize("gaps, budget", [([], 1.0), ([1.0, np.nan], 1.0), ([1.0], 0.0), ([1.0], -2.0)])
def test_invalid_input_is_rejected(gaps, budget):
    with pytest.raises(InvalidInputError):
        project_to_budget_simplex(gaps, budget)


@pytest.mark.parametrize("method", list(MultiplierMethod))
def test_multiplier_spending_residual(rng, method):
    for _ in range(200):
        values = rng.uniform(-50.0, 100.0, size=rng.integers(1, 40))
        budget = rng.uniform(0.5, 500.0)
        gamma = solve_budget_multiplier(values, budget, method)
        assert gamma >= 0.0
        spent = np.maximum(values - gamma, 0.0).sum()
        assert spent == pytest.approx(min(budget, np.maximum(values, 0.0).sum()), abs=1e-10)


def test_leveling_up_worked_example(example_incomes):
    result = leveling_up(example_incomes, 100.0, 100.0)
    assert result.level == pytest.approx(65.0)
    assert result.cutoff_index == 4
    np.testing.assert_allclose(result.transfers.transfers, [45.0, 30.0, 20.0, 5.0, 0.0], atol=1e-12)


def test_leveling_up_slack_budget_lifts_everyone_to_the_line():
    result = leveling_up([10.0, 40.0, 70.0, 120.0], 100.0, 1000.0)
    assert result.level == 100.0
    np.testing.assert_allclose(result.transfers.transfers, [90.0, 60.0, 30.0, 0.0])


def test_leveling_up_single_household():
    result = leveling_up([90.0], 100.0, 4.0)
    assert result.transfers.transfers[0] == pytest.approx(4.0)
    assert result.level == pytest.approx(94.0)
    assert result.cutoff_index == 1


def test_leveling_up_rejects_unsorted_incomes():
    with pytest.raises(InvalidInputError):
        leveling_up([30.0, 10.0, 20.0], 50.0, 5.0)


def test_projection_matches_brute_force_oracle(rng):
    for _ in range(500):
        n = int(rng.integers(1, 9))
        gaps = rng.uniform(-50.0, 100.0, size=n)
        budget = float(rng.uniform(1.0, 200.0))
        projected = project_to_budget_simplex(gaps, budget).transfers
        np.testing.assert_allclose(projected, _brute_force_projection(gaps, budget), atol=1e-8)


def test_three_characterizations_agree(rng):
    poverty_line = 100.0
    for _ in range(500):
        incomes = rng.uniform(0.0, 150.0, size=rng.integers(1, 30))
        budget = float(rng.uniform(1.0, 800.0))
        gaps = poverty_line - incomes

        projected = project_to_budget_simplex(gaps, budget).transfers
        gamma = solve_budget_multiplier(gaps, budget)
        kkt = threshold_transfers(gaps, 2.0 * gamma)
        leveled = leveling_up_unsorted(incomes, poverty_line, budget).transfers

        np.testing.assert_allclose(kkt, projected, atol=1e-9)
        np.testing.assert_allclose(leveled, projected, atol=1e-9)


def test_projection_is_nonexpansive(rng):
    for _ in range(300):
        n = int(rng.integers(2, 20))
        x, x_prime = rng.normal(20.0, 30.0, size=(2, n))
        budget = float(rng.uniform(1.0, 100.0))
        moved = np.linalg.norm(project_to_budget_simplex(x, budget).transfers - project_to_budget_simplex(x_prime, budget).transfers)
        assert moved <= np.linalg.norm(x - x_prime) + 1e-12


def test_transfer_vector_copies_and_validates():
    source = np.array([1.0, 2.0])
    vector = TransferVector(source, 5.0)
    assert source.flags.writeable
    assert not vector.transfers.flags.writeable
    with pytest.raises(InvalidInputError):
        TransferVector([1.0, -0.5], 5.0)
    with pytest.raises(InvalidInputError):
        TransferVector([4.0, 2.0], 5.0)


@pytest.mark.parametrize("method", list(MultiplierMethod))
def test_multiplier_is_nonincreasing_in_budget(rng, method):
    gaps = rng.normal(10.0, 8.0, 60)
    budgets = np.linspace(1.0, 1.2 * np.maximum(gaps, 0.0).sum(), 40)
    multipliers = np.array([solve_budget_multiplier(gaps, b, method) for b in budgets])
    assert np.all(np.diff(multipliers) <= 1e-9)
    assert multipliers[-1] == 0.0


def test_feasibility_slack_is_absolute_for_small_budgets():
    TransferVector([0.25, 0.25 + 5e-10], 0.5)
    with pytest.raises(InvalidInputError):
        TransferVector([0.25, 0.25 + 2e-9], 0.5)


def test_feasibility_slack_is_relative_for_large_budgets():
    TransferVector([6e5, 4e5 + 5e-4], 1e6)
    with pytest.raises(InvalidInputError):
        TransferVector([6e5, 4e5 + 2e-3], 1e6)
