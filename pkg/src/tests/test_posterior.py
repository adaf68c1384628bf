""" Test marginal densities, posterior means and the Tweedie cross-check """
import numpy as np
import pytest
from scipy.stats import norm

from src.data_pipline.models import NoisyPanel
from src.empirical_bayes.npmle import fit_prior
from src.empirical_bayes.posterior import (
    PosteriorUnderflowWarning,
    marginal_log_density,
    posterior_mean,
    tweedie_posterior_mean,
)
from src.empirical_bayes.prior import DiscretePrior
from src.utilities.errors import InvalidInputError


def _random_prior(rng: np.random.Generator) -> DiscretePrior:
    k = int(rng.integers(1, 12))
    support = np.sort(rng.choice(np.linspace(0.0, 20.0, 401), size=k, replace=False))
    return DiscretePrior(support, rng.dirichlet(np.ones(k)))


def test_point_mass_marginal_is_gaussian():
    prior = DiscretePrior.point_mass(4.0)
    assert marginal_log_density(prior, 5.5, 2.0) == pytest.approx(norm.logpdf(5.5, loc=4.0, scale=2.0), rel=1e-12)


def test_symmetric_two_point_marginal():
    prior = DiscretePrior([2.0, 8.0], [0.5, 0.5])
    expected = np.log(0.5 * norm.pdf(5.0, 2.0, 1.5) + 0.5 * norm.pdf(5.0, 8.0, 1.5))
    assert marginal_log_density(prior, 5.0, 1.5) == pytest.approx(expected, rel=1e-12)


def test_marginal_matches_direct_summation(rng):
    for _ in range(100):
        prior = _random_prior(rng)
        y = rng.uniform(0.0, 20.0, size=5)
        sigma = rng.uniform(0.5, 3.0, size=5)
        direct = norm.pdf(y[:, None], prior.support[None, :], sigma[:, None]) @ prior.weights
        np.testing.assert_allclose(np.exp(marginal_log_density(prior, y, sigma)), direct, rtol=1e-12)


def test_point_mass_posterior_ignores_the_estimate():
    prior = DiscretePrior.point_mass(7.0)
    np.testing.assert_allclose(posterior_mean(prior, np.array([-30.0, 0.0, 7.0, 100.0]), 2.0), 7.0)
    assert tweedie_posterior_mean(prior, 1.0, 3.0) == pytest.approx(7.0, abs=1e-12)


def test_symmetric_prior_at_midpoint():
    prior = DiscretePrior([3.0, 9.0], [0.5, 0.5])
    assert posterior_mean(prior, 6.0, 2.0) == pytest.approx(6.0, abs=1e-12)


def test_posterior_mean_stays_inside_the_support(rng):
    prior = DiscretePrior([1.0, 4.0, 10.0], [0.2, 0.5, 0.3])
    means = posterior_mean(prior, rng.normal(5.0, 20.0, size=500), rng.uniform(0.5, 5.0, size=500))
    assert np.all(means >= 1.0) and np.all(means <= 10.0)


def test_tweedie_agrees_with_posterior_mean(rng):
    for _ in range(1000):
        prior = _random_prior(rng)
        y = rng.uniform(-5.0, 25.0, size=8)
        sigma = rng.uniform(0.5, 4.0, size=8)
        np.testing.assert_allclose(
            tweedie_posterior_mean(prior, y, sigma), posterior_mean(prior, y, sigma), rtol=1e-10, atol=1e-10
        )


def test_tweedie_near_an_isolated_atom():
    prior = DiscretePrior([0.0, 50.0], [0.5, 0.5])
    assert tweedie_posterior_mean(prior, 1.0, 1.0) == pytest.approx(0.0, abs=1e-6)
    assert tweedie_posterior_mean(prior, 1.0, 1.0) == pytest.approx(posterior_mean(prior, 1.0, 1.0), abs=1e-10)


def test_scalar_in_scalar_out():
    prior = DiscretePrior([3.0, 9.0], [0.5, 0.5])
    assert isinstance(posterior_mean(prior, 4.0, 1.0), float)
    assert isinstance(marginal_log_density(prior, 4.0, 1.0), float)


def test_far_tail_estimates_do_not_underflow():
    prior = DiscretePrior([3.0, 9.0], [0.5, 0.5])
    assert posterior_mean(prior, 5000.0, 1.0) == pytest.approx(9.0)
    assert np.isfinite(marginal_log_density(prior, 5000.0, 1.0))


def test_vanishing_weights_fall_back_to_nearest_support_point():
    prior = DiscretePrior([3.0, 9.0], [0.5, 0.5])
    with np.errstate(over="ignore"), pytest.warns(PosteriorUnderflowWarning):
        value = posterior_mean(prior, 15.0, 1e-160)
    assert value == 9.0


@pytest.mark.parametrize(
    "support, weights",
    [([], []), ([1.0, 2.0], [1.0]), ([2.0, 1.0], [0.5, 0.5]), ([-1.0, 1.0], [0.5, 0.5]), ([1.0, 2.0], [0.7, 0.7])],
)
def test_invalid_priors_are_rejected(support, weights):
    with pytest.raises(InvalidInputError):
        DiscretePrior(support, weights)


def test_prior_moments():
    prior = DiscretePrior([3.0, 9.0], [0.5, 0.5])
    assert prior.mean() == pytest.approx(6.0)
    assert prior.second_moment() == pytest.approx(45.0)
    assert len(DiscretePrior.from_sample([2.0, 2.0, 5.0])) == 2


@pytest.mark.parametrize("sigma", [1.0, 2.0, 4.0])
def test_unimodal_prior_shrinks_toward_its_mean(sigma):
    support = np.linspace(0.0, 20.0, 81)
    weights = np.exp(-((support - 10.0) ** 2) / 18.0)
    prior = DiscretePrior(support, weights / weights.sum())
    y = np.linspace(-5.0, 25.0, 61)
    means = posterior_mean(prior, y, sigma)
    center = prior.mean()
    assert np.all(np.abs(means - center) <= np.abs(y - center) + 1e-9)
    assert np.all(np.diff(means) > 0)


@pytest.mark.parametrize("snr", [1.0, 0.25])
def test_fitted_posterior_means_beat_the_raw_estimates(snr):
    rng = np.random.default_rng(31)
    mu = rng.lognormal(1.0, 0.5, 1000)
    sigma = float(np.sqrt(mu.var() / snr))
    panel = NoisyPanel.homoskedastic(mu + sigma * rng.standard_normal(mu.size), sigma)
    means = posterior_mean(fit_prior(panel).prior, panel.estimates, sigma)
    assert np.mean((means - mu) ** 2) <= np.mean((panel.estimates - mu) ** 2)
