"""
Two-column text format for fitted priors.

    # n=500 grid_lower=0.0 grid_upper=12.5 iterations=812 loglik=-1.7342
    support,weight
    0.0,0.0
    ...

The header line is informational; ``read_prior`` only needs the columns.
"""
from __future__ import annotations

from pathlib import Path

import pandas as pd

from src.empirical_bayes.npmle import NPMLEFit
from src.empirical_bayes.prior import WEIGHT_SUM_TOL, DiscretePrior
from src.utilities.errors import InvalidInputError

PRIOR_COLUMNS: tuple[str, str] = ("support", "weight")


def format_prior_header(fit: NPMLEFit) -> str:
    return (
        f"# n={fit.n} grid_lower={float(fit.grid_lower)!r} grid_upper={float(fit.grid_upper)!r} "
        f"iterations={fit.iterations} loglik={float(fit.log_likelihood)!r}"
    )


def write_prior(path: Path, prior: DiscretePrior, header: str = "# prior") -> Path:
    """ Write ``prior`` to ``path`` with a one-line ``#`` header """
    if not header.startswith("#"):
        header = f"# {header}"
    frame = pd.DataFrame({PRIOR_COLUMNS[0]: prior.support, PRIOR_COLUMNS[1]: prior.weights})
    with open(path, "w", newline="") as fh:
        fh.write(header + "\n")
        frame.to_csv(fh, index=False, lineterminator="\n")
    return path


def write_fitted_prior(path: Path, fit: NPMLEFit) -> Path:
    return write_prior(path, fit.prior, format_prior_header(fit))


def read_prior(path: Path) -> DiscretePrior:
    """
    Read a prior file. Weights are renormalized when their sum is off by at most
    1e-8, so hand-written files need not be exact.
    """
    path = Path(path)
    if not path.exists():
        raise InvalidInputError(f"prior file not found: {path}")
    frame = pd.read_csv(path, comment="#", float_precision="round_trip")
    missing = [c for c in PRIOR_COLUMNS if c not in frame.columns]
    if missing:
        raise InvalidInputError(f"prior file {path} lacks column(s) {missing}")

    weights = frame[PRIOR_COLUMNS[1]].to_numpy(dtype=float)
    total = weights.sum()
    if WEIGHT_SUM_TOL < abs(total - 1.0) <= 1e-8:
        weights = weights / total
    return DiscretePrior(frame[PRIOR_COLUMNS[0]].to_numpy(dtype=float), weights)
