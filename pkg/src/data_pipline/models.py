""" Store Dataclasses for the household panels flowing through the pipeline"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from src.utilities.errors import InvalidInputError


def _frozen_vector(values: Sequence[float] | np.ndarray) -> np.ndarray:
    arr = np.array(values, dtype=float).reshape(-1)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class NoisyPanel:
    """
    Noisy income estimates y_hat_i and their known noise scales sigma_i.

    Every sigma_i must be strictly positive; the panel is immutable and safe to
    share between threads.
    """

    estimates: np.ndarray
    noise_scales: np.ndarray

    def __post_init__(self) -> None:
        estimates = _frozen_vector(self.estimates)
        noise_scales = _frozen_vector(self.noise_scales)

        if estimates.size != noise_scales.size:
            raise InvalidInputError(f"{estimates.size} estimates but {noise_scales.size} noise scales")
        if not (np.all(np.isfinite(estimates)) and np.all(np.isfinite(noise_scales))):
            raise InvalidInputError("estimates and noise scales must be finite")
        if np.any(noise_scales <= 0):
            raise InvalidInputError("noise scales must be strictly positive")

        object.__setattr__(self, "estimates", estimates)
        object.__setattr__(self, "noise_scales", noise_scales)

    @classmethod
    def homoskedastic(cls, estimates: Sequence[float] | np.ndarray, sigma: float) -> NoisyPanel:
        estimates = np.asarray(estimates, dtype=float)
        return cls(estimates, np.full(estimates.shape, float(sigma)))

    def __len__(self) -> int:
        return self.estimates.size

    @property
    def pooled_sigma(self) -> float:
        """ sqrt of the average noise variance """
        return float(np.sqrt(np.mean(self.noise_scales**2)))

    def unit_noise(self) -> NoisyPanel:
        """ Estimates divided by the pooled sigma, every noise scale set to one """
        return NoisyPanel.homoskedastic(self.estimates / self.pooled_sigma, 1.0)


@dataclass(frozen=True)
class HouseholdPanel:
    """
    An ingested panel file: household ids, the noisy panel, and the true
    incomes when the file carries them.
    """

    household_ids: tuple[str, ...]
    panel: NoisyPanel
    true_incomes: Optional[np.ndarray] = field(default=None)

    def __post_init__(self) -> None:
        if len(self.household_ids) != len(self.panel):
            raise InvalidInputError("household_ids and panel differ in length")
        if self.true_incomes is not None:
            true_incomes = _frozen_vector(self.true_incomes)
            if true_incomes.size != len(self.panel):
                raise InvalidInputError("true_incomes and panel differ in length")
            object.__setattr__(self, "true_incomes", true_incomes)

    def __len__(self) -> int:
        return len(self.panel)

    @property
    def has_true_incomes(self) -> bool:
        return self.true_incomes is not None
