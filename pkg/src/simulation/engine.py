"""
The replication loop.

The population (mu, realized incomes y, poverty line, budget) is fixed for
the whole experiment; every replication redraws only the noise. Within a
replication all rules see the same panel, so paired differences between
rules isolate the rule effect.

Random streams are derived from the master seed by spawn key:
``(0,)`` synthetic incomes, ``(1,)`` idiosyncratic income noise and
``(2, r)`` the panel of replication r. The keys do not depend on the SNR
level or the number of replications, so SNR sweeps reuse the same draws.
"""
from __future__ import annotations

import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from src.data_pipline.models import NoisyPanel
from src.evaluation.metrics import MetricsReport, evaluate_allocation
from src.rules.decision_rules import PolicyContext, RuleKind, RuleSpec, apply_rule
from src.simulation.config import EvaluationTarget, SimConfig
from src.simulation.income_profiles import IncomeProfile, load_income_profile
from src.utilities.app_logger import AppLogger
from src.utilities.errors import InvalidConfigError, InvalidInputError, TargetingException

THREADS_ENV_VAR: str = "TARGETING_THREADS"

# E[sigma_i^2] = sigma_c^2 (a^2 + ab + b^2) / 3 for sigma_i ~ U[a sigma_c, b sigma_c], a = 1/2, b = 3/2
_UNIFORM_SECOND_MOMENT: float = (0.5**2 + 0.5 * 1.5 + 1.5**2) / 3.0

_INCOME_STREAM: int = 0
_INCOME_NOISE_STREAM: int = 1
_REPLICATION_STREAM: int = 2

logger = AppLogger().get_logger(__name__)


@dataclass(frozen=True)
class ReplicationRecord:
    """ One (rule, replication) outcome; ``metrics`` is None when the rule failed """

    snr: float
    replication: int
    rule: str
    metrics: Optional[MetricsReport]
    spend: float
    runtime: float
    multiplier: Optional[float] = None
    shrink_factor: Optional[float] = None
    budget_slack: bool = False
    error: Optional[str] = None

    @property
    def failed(self) -> bool:
        return self.error is not None


@dataclass(frozen=True)
class Population:
    """ Everything held fixed across replications """

    profile: IncomeProfile
    incomes: np.ndarray
    context: PolicyContext
    sigma_c: float


def stream(seed: int, *key: int) -> np.random.SeedSequence:
    return np.random.SeedSequence(entropy=seed, spawn_key=key)


def calibrate_noise_scale(incomes: Sequence[float] | np.ndarray, snr_target: float) -> float:
    """
    sigma_c such that Var(y) / E[sigma_i^2] = snr_target when sigma_i ~ U[sigma_c / 2, 3 sigma_c / 2].

    Closed form: sigma_c = sqrt(3 Var(y) / (3.25 snr_target)).
    """
    if not snr_target > 0:
        raise InvalidInputError(f"snr_target must be positive, got {snr_target}")
    variance = float(np.var(np.asarray(incomes, dtype=float)))
    if not variance > 0:
        raise InvalidInputError("income variance is zero; the SNR is undefined")
    return float(np.sqrt(variance / (snr_target * _UNIFORM_SECOND_MOMENT)))


def make_policy_context(
    incomes: Sequence[float] | np.ndarray,
    budget_fraction: float,
    poverty_quantile: float = 0.5,
) -> PolicyContext:
    """
    Poverty line at the lower ``poverty_quantile`` of incomes (the lower median
    by default) and a budget of ``budget_fraction`` times the total poverty gap.
    """
    y = np.asarray(incomes, dtype=float)
    if y.size == 0:
        raise InvalidInputError("cannot build a policy context from no incomes")
    poverty_line = float(np.quantile(y, poverty_quantile, method="lower"))
    total_gap = float(np.maximum(poverty_line - y, 0.0).sum())
    if total_gap <= 0:
        raise InvalidConfigError("total poverty gap is zero; no household lies below the poverty line")
    return PolicyContext(poverty_line, budget_fraction * total_gap)


def generate_panel(mu: Sequence[float] | np.ndarray, sigma_c: float, rng: np.random.Generator) -> NoisyPanel:
    """ sigma_i ~ U[sigma_c / 2, 3 sigma_c / 2] and y_hat_i ~ N(mu_i, sigma_i^2), independently """
    mu = np.asarray(mu, dtype=float)
    if np.any(mu < 0):
        raise InvalidInputError("conditional means must be nonnegative")
    if not sigma_c > 0:
        raise InvalidInputError(f"sigma_c must be positive, got {sigma_c}")
    sigma = rng.uniform(0.5 * sigma_c, 1.5 * sigma_c, size=mu.size)
    return NoisyPanel(rng.normal(mu, sigma), sigma)


def build_population(config: SimConfig) -> Population:
    profile = load_income_profile(config.income_source, stream(config.seed, _INCOME_STREAM))
    incomes = profile.mu
    if config.income_noise_sd > 0:
        rng = np.random.default_rng(stream(config.seed, _INCOME_NOISE_STREAM))
        incomes = incomes + rng.normal(0.0, config.income_noise_sd, size=incomes.size)

    context = make_policy_context(incomes, config.budget_fraction, config.poverty_quantile)
    return Population(profile, incomes, context, calibrate_noise_scale(incomes, config.snr_target))


def resolve_workers(config: SimConfig) -> int:
    if config.workers is not None:
        return config.workers
    raw = os.getenv(THREADS_ENV_VAR, "1")
    try:
        return max(1, int(raw))
    except ValueError:
        raise InvalidConfigError(f"{THREADS_ENV_VAR}={raw!r} is not an integer")


def _active_rules(config: SimConfig, population: Population) -> tuple[RuleSpec, ...]:
    if population.profile.true_prior is not None:
        return config.rules
    skipped = [r for r in config.rules if r.kind is RuleKind.ORACLE_BAYES]
    if skipped:
        logger.warning("oracle_bayes skipped: income source %s has no known prior", population.profile.source)
    return tuple(r for r in config.rules if r.kind is not RuleKind.ORACLE_BAYES)


def _run_rule(
    spec: RuleSpec,
    panel: NoisyPanel,
    population: Population,
    config: SimConfig,
    replication: int,
) -> ReplicationRecord:
    target = population.incomes if config.evaluate_against is EvaluationTarget.REALIZED else population.profile.mu
    started = time.perf_counter()
    try:
        result = apply_rule(
            spec,
            panel,
            population.context,
            true_prior=population.profile.true_prior,
            true_incomes=population.incomes,
            pooled_sigma=population.sigma_c,
        )
        metrics = evaluate_allocation(result.transfers, target, population.context.poverty_line, config.loss)
    except TargetingException as e:
        logger.warning("rule failed snr=%s replication=%d rule=%s error=%s", config.snr_target, replication, spec.name, e)
        return ReplicationRecord(config.snr_target, replication, spec.name, None, 0.0, time.perf_counter() - started, error=str(e))
    except Exception as e:
        logger.exception("unexpected failure snr=%s replication=%d rule=%s", config.snr_target, replication, spec.name)
        return ReplicationRecord(
            config.snr_target, replication, spec.name, None, 0.0, time.perf_counter() - started,
            error=f"{type(e).__name__}: {e}",
        )

    runtime = time.perf_counter() - started
    logger.debug("replication=%d rule=%s runtime=%.4fs", replication, spec.name, runtime)
    return ReplicationRecord(
        snr=config.snr_target,
        replication=replication,
        rule=spec.name,
        metrics=metrics,
        spend=result.spend,
        runtime=runtime,
        multiplier=result.multiplier,
        shrink_factor=result.shrink_factor,
        budget_slack=result.budget_slack,
    )


def run_replication(
    config: SimConfig,
    population: Population,
    rules: Sequence[RuleSpec],
    replication: int,
) -> list[ReplicationRecord]:
    """ Draw one panel and run every rule on it """
    rng = np.random.default_rng(stream(config.seed, _REPLICATION_STREAM, replication))
    panel = generate_panel(population.profile.mu, population.sigma_c, rng)
    return [_run_rule(spec, panel, population, config, replication) for spec in rules]


def run_experiment(config: SimConfig) -> list[ReplicationRecord]:
    """
    Run every rule on ``config.replications`` fresh panels drawn around a fixed population.

    Output order is (replication, rule) regardless of the worker count, and the
    result is fully determined by the config and its seed.
    """
    population = build_population(config)
    rules = _active_rules(config, population)
    workers = resolve_workers(config)
    logger.info(
        "experiment start snr=%s n=%d replications=%d rules=%s workers=%d z=%.6g budget=%.6g sigma_c=%.6g",
        config.snr_target, len(population.profile), config.replications, ",".join(r.name for r in rules),
        workers, population.context.poverty_line, population.context.budget, population.sigma_c,
    )

    def _one(replication: int) -> list[ReplicationRecord]:
        return run_replication(config, population, rules, replication)

    if workers == 1:
        batches = [_one(r) for r in range(config.replications)]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            batches = list(pool.map(_one, range(config.replications)))

    records = [record for batch in batches for record in batch]
    failures = sum(record.failed for record in records)
    logger.info("experiment done snr=%s records=%d failures=%d", config.snr_target, len(records), failures)
    return records
