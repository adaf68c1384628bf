""" Test the allocation rules and the uniform apply_rule interface """
import numpy as np
import pytest

from src.allocation.projection import project_to_budget_simplex, solve_budget_multiplier
from src.data_pipline.models import NoisyPanel
from src.empirical_bayes.npmle import GridSpacing, NPMLEConfig
from src.empirical_bayes.prior import DiscretePrior
from src.rules.decision_rules import (
    PolicyContext,
    RuleKind,
    RuleSpec,
    apply_rule,
    bayes_rule_from_means,
    eb_rule,
    eb_truncnorm_rule,
    full_info_rule,
    james_stein_rule,
    oracle_bayes_rule,
    plug_in_rule,
    ubi_rule,
)
from src.utilities.errors import InvalidConfigError, InvalidInputError


def test_full_info_worked_example(example_incomes, example_context):
    np.testing.assert_allclose(full_info_rule(example_incomes, example_context).transfers, [45.0, 30.0, 20.0, 5.0, 0.0])


def test_full_info_slack_budget_lifts_everyone(example_incomes):
    transfers = full_info_rule(example_incomes, PolicyContext(100.0, 1000.0)).transfers
    np.testing.assert_allclose(example_incomes + transfers, [100.0, 100.0, 100.0, 100.0, 100.0])


def test_plug_in_without_noise_is_the_full_information_optimum(example_incomes, example_context):
    panel = NoisyPanel.homoskedastic(example_incomes, 1.0)
    np.testing.assert_array_equal(
        plug_in_rule(panel, example_context).transfers, full_info_rule(example_incomes, example_context).transfers
    )


def test_plug_in_is_a_threshold_rule(rng):
    for _ in range(50):
        estimates = rng.normal(50.0, 30.0, size=40)
        ctx = PolicyContext(60.0, float(rng.uniform(10.0, 400.0)))
        gamma = solve_budget_multiplier(ctx.poverty_line - estimates, ctx.budget)
        expected = np.maximum(ctx.poverty_line - estimates - gamma, 0.0)
        np.testing.assert_allclose(plug_in_rule(NoisyPanel.homoskedastic(estimates, 5.0), ctx).transfers, expected)


def test_james_stein_worked_example(example_panel, example_context, example_sigma):
    transfers = james_stein_rule(example_panel, example_context, example_sigma)
    np.testing.assert_allclose(transfers.transfers, [32.9, 21.9, 14.6, 3.7, 0.0], atol=0.05)
    # spends about 73% of the budget
    assert transfers.spend == pytest.approx(73.1, abs=0.1)


def test_james_stein_with_few_recipients_equals_plug_in():
    panel = NoisyPanel.homoskedastic([10.0, 20.0, 90.0, 95.0], 2.0)
    ctx = PolicyContext(50.0, 30.0)
    np.testing.assert_array_equal(james_stein_rule(panel, ctx, 2.0).transfers, plug_in_rule(panel, ctx).transfers)


def test_james_stein_spend_is_factor_times_plug_in_spend(rng):
    panel = NoisyPanel.homoskedastic(rng.uniform(0.0, 100.0, 30), 3.0)
    ctx = PolicyContext(80.0, 200.0)
    result = apply_rule(RuleSpec(RuleKind.JAMES_STEIN, {"pooled_sigma": "3.0"}), panel, ctx)
    plug_in = plug_in_rule(panel, ctx)
    assert result.shrink_factor < 1.0
    assert result.spend == pytest.approx(result.shrink_factor * min(ctx.budget, plug_in.spend))


def test_bayes_rule_with_flat_prior_means_is_plug_in(example_panel, example_context):
    np.testing.assert_array_equal(
        bayes_rule_from_means(example_panel.estimates, example_context).transfers,
        plug_in_rule(example_panel, example_context).transfers,
    )


def test_bayes_rule_nobody_posterior_poor(example_context):
    assert bayes_rule_from_means([120.0, 100.0, 300.0], example_context).spend == 0.0


def test_oracle_with_point_mass_prior_is_uniform():
    panel = NoisyPanel([5.0, 40.0, 90.0, 200.0], [1.0, 5.0, 10.0, 20.0])
    transfers = oracle_bayes_rule(panel, DiscretePrior.point_mass(60.0), PolicyContext(100.0, 100.0)).transfers
    np.testing.assert_allclose(transfers, [25.0, 25.0, 25.0, 25.0])


def test_oracle_with_vanishing_noise_approaches_plug_in(example_incomes, example_context):
    prior = DiscretePrior(example_incomes, np.full(5, 0.2))
    panel = NoisyPanel.homoskedastic(example_incomes, 1e-3)
    np.testing.assert_allclose(
        oracle_bayes_rule(panel, prior, example_context).transfers, [45.0, 30.0, 20.0, 5.0, 0.0], atol=1e-6
    )


def test_eb_rule_single_household():
    panel = NoisyPanel.homoskedastic([30.0], 2.0)
    ctx = PolicyContext(100.0, 25.0)
    transfers = eb_rule(panel, ctx).transfers
    assert transfers[0] == pytest.approx(25.0)


def test_eb_rule_is_deterministic(rng):
    panel = NoisyPanel(rng.uniform(0.0, 50.0, 200), rng.uniform(2.0, 6.0, 200))
    ctx = PolicyContext(25.0, 150.0)
    first = eb_rule(panel, ctx, NPMLEConfig(tol=1e-7))
    second = eb_rule(panel, ctx, NPMLEConfig(tol=1e-7))
    np.testing.assert_array_equal(first.transfers, second.transfers)


def test_eb_truncnorm_spends_the_budget(rng):
    panel = NoisyPanel(rng.uniform(0.0, 50.0, 200), rng.uniform(2.0, 6.0, 200))
    transfers = eb_truncnorm_rule(panel, PolicyContext(25.0, 150.0))
    assert transfers.spend == pytest.approx(150.0)


def test_ubi():
    transfers = ubi_rule(4, PolicyContext(10.0, 100.0))
    np.testing.assert_array_equal(transfers.transfers, [25.0, 25.0, 25.0, 25.0])
    assert transfers.spend == pytest.approx(100.0)
    with pytest.raises(InvalidInputError):
        ubi_rule(0, PolicyContext(10.0, 100.0))


def test_apply_rule_metadata(example_panel, example_context, example_incomes):
    plug_in = apply_rule(RuleSpec("plug_in"), example_panel, example_context)
    assert plug_in.multiplier == pytest.approx(35.0)
    assert plug_in.shadow_price == pytest.approx(70.0)
    assert not plug_in.budget_slack

    full_info = apply_rule(RuleSpec("full_info"), example_panel, example_context, true_incomes=example_incomes)
    np.testing.assert_allclose(full_info.transfers.transfers, plug_in.transfers.transfers)

    eb = apply_rule(RuleSpec("eb_npmle", {"grid_size": "20"}), example_panel, example_context)
    assert eb.prior_fit is not None and len(eb.prior_fit.prior) == 20

    ubi = apply_rule(RuleSpec("ubi"), example_panel, example_context)
    assert ubi.multiplier is None and ubi.shadow_price is None


def test_apply_rule_reports_slack_budget():
    result = apply_rule(RuleSpec("plug_in"), NoisyPanel.homoskedastic([95.0, 99.0], 1.0), PolicyContext(100.0, 50.0))
    assert result.budget_slack
    assert result.multiplier == 0.0


def test_apply_rule_missing_inputs(example_panel, example_context):
    with pytest.raises(InvalidInputError):
        apply_rule(RuleSpec("oracle_bayes"), example_panel, example_context)
    with pytest.raises(InvalidInputError):
        apply_rule(RuleSpec("full_info"), example_panel, example_context)


@pytest.mark.parametrize(
    "kind, options",
    [
        ("lasso", {}),
        ("plug_in", {"grid_size": "10"}),
        ("eb_npmle", {"grid_size": "ten"}),
        ("james_stein", {"pooled_sigma": "-1"}),
    ],
)
def test_rule_spec_rejects_bad_options(kind, options):
    with pytest.raises(InvalidConfigError):
        RuleSpec(kind, options)


def test_rule_spec_parses_string_options():
    spec = RuleSpec("eb_npmle", {"grid_size": "150", "tol": "1e-6", "grid_spacing": "quantile"})
    config = spec.npmle_config()
    assert config.grid_size == 150 and config.tol == 1e-6 and config.grid_spacing == "quantile"


@pytest.mark.parametrize("ctx", [dict(poverty_line=np.nan, budget=1.0), dict(poverty_line=1.0, budget=0.0)])
def test_policy_context_validation(ctx):
    with pytest.raises(InvalidInputError):
        PolicyContext(**ctx)


def test_projection_and_threshold_rule_coincide(rng):
    for _ in range(50):
        means = rng.uniform(0.0, 120.0, 25)
        ctx = PolicyContext(70.0, float(rng.uniform(5.0, 300.0)))
        np.testing.assert_allclose(
            bayes_rule_from_means(means, ctx).transfers,
            project_to_budget_simplex(ctx.poverty_line - means, ctx.budget).transfers,
        )


def test_eb_truncnorm_is_scale_equivariant(rng):
    panel = NoisyPanel(rng.uniform(0.0, 50.0, 200), rng.uniform(2.0, 6.0, 200))
    scaled = NoisyPanel(10.0 * panel.estimates, 10.0 * panel.noise_scales)
    base = eb_truncnorm_rule(panel, PolicyContext(25.0, 150.0))
    np.testing.assert_allclose(
        eb_truncnorm_rule(scaled, PolicyContext(250.0, 1500.0)).transfers, 10.0 * base.transfers, rtol=1e-9, atol=1e-9
    )


def test_poorer_posterior_means_never_receive_less(rng):
    means = rng.uniform(0.0, 120.0, 300)
    transfers = bayes_rule_from_means(means, PolicyContext(60.0, 900.0)).transfers
    order = np.argsort(means)
    assert np.all(np.diff(transfers[order]) <= 1e-12)


def test_eb_transfers_follow_the_estimates_for_a_common_sigma(rng):
    panel = NoisyPanel.homoskedastic(rng.lognormal(3.0, 0.6, 300), 8.0)
    transfers = eb_rule(panel, PolicyContext(20.0, 400.0), NPMLEConfig(tol=1e-7)).transfers
    order = np.argsort(panel.estimates)
    assert np.all(np.diff(transfers[order]) <= 1e-9)


def test_eb_with_vanishing_noise_approaches_the_full_information_optimum(example_incomes, example_context):
    # a quantile grid puts support points on the three interior incomes and within 3e-3 of the outer two
    panel = NoisyPanel.homoskedastic(example_incomes, 1e-3)
    config = NPMLEConfig(grid_size=9, grid_spacing=GridSpacing.QUANTILE)
    expected = full_info_rule(example_incomes, example_context).transfers
    np.testing.assert_allclose(eb_rule(panel, example_context, config).transfers, expected, atol=1e-2)
