"""
Discrete mixing distributions.

A ``DiscretePrior`` is the common currency of the empirical Bayes code: the
NPMLE returns one, the oracle rule consumes one, and prior files store one.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from src.utilities.errors import InvalidInputError

WEIGHT_SUM_TOL: float = 1e-10


@dataclass(frozen=True)
class DiscretePrior:
    """ Support points (strictly increasing, nonnegative) and probability weights """

    support: np.ndarray
    weights: np.ndarray

    def __post_init__(self) -> None:
        support = np.array(self.support, dtype=float).reshape(-1)
        weights = np.array(self.weights, dtype=float).reshape(-1)

        if support.size == 0:
            raise InvalidInputError("prior support must be nonempty")
        if support.size != weights.size:
            raise InvalidInputError(f"support has {support.size} points but weights has {weights.size}")
        if not (np.all(np.isfinite(support)) and np.all(np.isfinite(weights))):
            raise InvalidInputError("prior support and weights must be finite")
        if np.any(support < 0):
            raise InvalidInputError("prior support must be nonnegative")
        if np.any(np.diff(support) <= 0):
            raise InvalidInputError("prior support must be strictly increasing")
        if np.any(weights < 0):
            raise InvalidInputError("prior weights must be nonnegative")
        if abs(weights.sum() - 1.0) > WEIGHT_SUM_TOL:
            raise InvalidInputError(f"prior weights sum to {weights.sum()!r}, expected 1")

        support.setflags(write=False)
        weights.setflags(write=False)
        object.__setattr__(self, "support", support)
        object.__setattr__(self, "weights", weights)

    @classmethod
    def point_mass(cls, location: float) -> DiscretePrior:
        return cls(np.array([float(location)]), np.array([1.0]))

    @classmethod
    def from_sample(cls, values: Sequence[float] | np.ndarray) -> DiscretePrior:
        """ Empirical distribution of a sample (ties merged) """
        support, counts = np.unique(np.asarray(values, dtype=float), return_counts=True)
        return cls(support, counts / counts.sum())

    def __len__(self) -> int:
        return self.support.size

    def mean(self) -> float:
        return float(self.weights @ self.support)

    def second_moment(self) -> float:
        return float(self.weights @ self.support**2)

    def effective_support_size(self, threshold: float = 1e-6) -> int:
        """ Number of atoms carrying more than ``threshold`` mass """
        return int(np.count_nonzero(self.weights > threshold))

    def sample(self, size: int, rng: np.random.Generator) -> np.ndarray:
        return rng.choice(self.support, size=size, p=self.weights)
