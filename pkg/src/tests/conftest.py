""" Shared fixtures: the five-household worked example and file helpers """
import math
from pathlib import Path

import numpy as np
import pytest

from src.data_pipline.models import NoisyPanel
from src.rules.decision_rules import PolicyContext


@pytest.fixture
def example_incomes() -> np.ndarray:
    return np.array([20.0, 35.0, 45.0, 60.0, 100.0])


@pytest.fixture
def example_context() -> PolicyContext:
    return PolicyContext(poverty_line=100.0, budget=100.0)


@pytest.fixture
def example_sigma() -> float:
    """ The noise scale that yields a shrinkage factor of 0.731 on the worked example """
    return math.sqrt(901.15)


@pytest.fixture
def example_panel(example_incomes, example_sigma) -> NoisyPanel:
    return NoisyPanel.homoskedastic(example_incomes, example_sigma)


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20240611)


@pytest.fixture
def write_text(tmp_path):
    """ Write ``text`` to ``tmp_path / name`` and return the path """

    def _write(name: str, text: str) -> Path:
        path = tmp_path / name
        path.write_text(text, encoding="utf-8")
        return path

    return _write
