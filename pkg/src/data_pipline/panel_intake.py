"""
Uses pandas library to read a household panel csv into a pandas.DataFrame and
validate it into a HouseholdPanel for the allocation rules.

Panel File Headers Standard:
    - household_id   unique, read as text
    - y_hat          noisy income estimate
    - sigma          noise scale, strictly positive
    - y_true         optional, true income (used by evaluate and simulations)

Row numbers in error messages are file line numbers (the header is line 1).
"""
from __future__ import annotations

import math
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
import pandas as pd

from src.data_pipline.models import HouseholdPanel, NoisyPanel
from src.utilities.errors import IngestErrorCode, PanelIngestError

ID_COLUMN: str = "household_id"
ESTIMATE_COLUMN: str = "y_hat"
SIGMA_COLUMN: str = "sigma"
TRUE_INCOME_COLUMN: str = "y_true"
REQUIRED_COLUMNS: tuple[str, ...] = (ID_COLUMN, ESTIMATE_COLUMN, SIGMA_COLUMN)

_FIRST_DATA_LINE: int = 2


def _parse_float(cell: str) -> float:
    """ Unparsable cells become nan """
    try:
        return float(cell)
    except (TypeError, ValueError):
        return math.nan


class PanelFile:
    """
    Read in a panel file in the form of comma separated values.

    Validation happens in stages so each failure carries its own error code:
    existence, emptiness, columns, numeric format, sigma sign, duplicate ids.
    """

    def __init__(self, path: Path) -> None:
        self._path = Path(path)
        self._df: pd.DataFrame = pd.DataFrame()

    def __repr__(self) -> str:
        return f"PanelFile(path={self._path!s}, rows={len(self._df)})"

    @property
    def panel_dataframe(self) -> pd.DataFrame:
        return self._df

    def _read_panel_csv_df(self) -> pd.DataFrame:
        """ Read everything as text; numeric parsing is done column by column for precise errors """
        if not self._path.exists():
            raise PanelIngestError(IngestErrorCode.FILE_NOT_FOUND, f"panel file not found: {self._path}")
        try:
            return pd.read_csv(self._path, dtype=str, keep_default_na=False, skipinitialspace=True)
        except pd.errors.EmptyDataError:
            raise PanelIngestError(IngestErrorCode.EMPTY_FILE, f"panel file {self._path} is empty")

    def _numeric_column(self, frame: pd.DataFrame, column: str) -> np.ndarray:
        values = frame[column].map(_parse_float).to_numpy(dtype=float)
        bad = np.flatnonzero(~np.isfinite(values))
        if bad.size:
            lines = [int(i) + _FIRST_DATA_LINE for i in bad]
            raise PanelIngestError(
                IngestErrorCode.MALFORMED_NUMERIC,
                f"{self._path}: column {column!r} has malformed numbers on line(s) {lines}",
                lines,
            )
        return values

    def load(self) -> HouseholdPanel:
        frame = self._read_panel_csv_df()
        frame.columns = [str(c).strip() for c in frame.columns]

        missing = [c for c in REQUIRED_COLUMNS if c not in frame.columns]
        if missing:
            raise PanelIngestError(IngestErrorCode.MISSING_COLUMN, f"{self._path}: missing column(s) {missing}")
        if frame.empty:
            raise PanelIngestError(IngestErrorCode.EMPTY_FILE, f"panel file {self._path} has no rows")

        estimates = self._numeric_column(frame, ESTIMATE_COLUMN)
        sigma = self._numeric_column(frame, SIGMA_COLUMN)
        true_incomes: Optional[np.ndarray] = None
        if TRUE_INCOME_COLUMN in frame.columns:
            true_incomes = self._numeric_column(frame, TRUE_INCOME_COLUMN)

        nonpositive = np.flatnonzero(sigma <= 0)
        if nonpositive.size:
            lines = [int(i) + _FIRST_DATA_LINE for i in nonpositive]
            raise PanelIngestError(
                IngestErrorCode.NONPOSITIVE_SIGMA,
                f"{self._path}: sigma must be positive; rejected line(s) {lines}",
                lines,
            )

        ids = frame[ID_COLUMN].str.strip()
        duplicated = np.flatnonzero(ids.duplicated(keep=False).to_numpy())
        if duplicated.size:
            lines = [int(i) + _FIRST_DATA_LINE for i in duplicated]
            raise PanelIngestError(
                IngestErrorCode.DUPLICATE_ID,
                f"{self._path}: duplicate household_id on line(s) {lines}",
                lines,
            )

        self._df = frame
        return HouseholdPanel(tuple(ids), NoisyPanel(estimates, sigma), true_incomes)


def ingest_panel(path: Path) -> HouseholdPanel:
    """ Read and validate a panel file """
    return PanelFile(path).load()


def write_panel(
    path: Path,
    panel: NoisyPanel,
    household_ids: Optional[Sequence[str]] = None,
    true_incomes: Optional[Sequence[float]] = None,
) -> Path:
    """ Write a panel file; floats are written at full precision so a re-read is exact """
    ids = list(household_ids) if household_ids is not None else [f"h{i + 1}" for i in range(len(panel))]
    frame = pd.DataFrame({ID_COLUMN: ids, ESTIMATE_COLUMN: panel.estimates, SIGMA_COLUMN: panel.noise_scales})
    if true_incomes is not None:
        frame[TRUE_INCOME_COLUMN] = np.asarray(true_incomes, dtype=float)
    frame.to_csv(path, index=False, lineterminator="\n")
    return path


TRANSFER_COLUMN: str = "transfer"


def _footer_value(value: Optional[float]) -> str:
    return "none" if value is None else repr(float(value))


def write_transfers(
    path: Path,
    household_ids: Sequence[str],
    transfers: Sequence[float] | np.ndarray,
    *,
    rule: str,
    multiplier: Optional[float],
    spend: float,
) -> Path:
    """
    Write a transfers file: household_id,transfer rows followed by a commented metadata footer.

    :param rule: the rule name recorded in the footer
    :param multiplier: shadow-price threshold gamma; ``none`` for rules without one
    :param spend: total transfers paid out
    """
    frame = pd.DataFrame({ID_COLUMN: list(household_ids), TRANSFER_COLUMN: np.asarray(transfers, dtype=float)})
    with open(path, "w", encoding="utf-8", newline="") as handle:
        frame.to_csv(handle, index=False, lineterminator="\n")
        handle.write(f"# rule={rule}\n")
        handle.write(f"# multiplier={_footer_value(multiplier)}\n")
        handle.write(f"# spend={_footer_value(spend)}\n")
    return path


def read_transfers(path: Path) -> tuple[tuple[str, ...], np.ndarray]:
    """ Read a transfers file back; the footer is skipped """
    path = Path(path)
    if not path.exists():
        raise PanelIngestError(IngestErrorCode.FILE_NOT_FOUND, f"transfers file not found: {path}")
    try:
        frame = pd.read_csv(path, dtype=str, comment="#", keep_default_na=False)
    except pd.errors.EmptyDataError:
        raise PanelIngestError(IngestErrorCode.EMPTY_FILE, f"transfers file {path} is empty")
    missing = [c for c in (ID_COLUMN, TRANSFER_COLUMN) if c not in frame.columns]
    if missing:
        raise PanelIngestError(IngestErrorCode.MISSING_COLUMN, f"{path}: missing column(s) {missing}")
    values = frame[TRANSFER_COLUMN].map(_parse_float).to_numpy(dtype=float)
    bad = np.flatnonzero(~np.isfinite(values))
    if bad.size:
        lines = [int(i) + _FIRST_DATA_LINE for i in bad]
        raise PanelIngestError(IngestErrorCode.MALFORMED_NUMERIC, f"{path}: malformed transfer on line(s) {lines}", lines)
    return tuple(frame[ID_COLUMN].str.strip()), values
