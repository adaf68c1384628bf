"""
Tabulation of replication records.

One CSV row per (snr, replication, rule) and an aggregate JSON per
(snr, rule). Runtimes are logged but never written, so reruns with the same
seed produce identical files.
"""
from __future__ import annotations

import json
import math
from pathlib import Path
from typing import Any, Iterable, Optional

import pandas as pd

from src.evaluation.metrics import bayes_regret_estimate, paired_win_rate
from src.rules.decision_rules import RuleKind
from src.simulation.engine import ReplicationRecord

METRIC_COLUMNS: tuple[str, ...] = (
    "loss",
    "loss_ratio",
    "inclusion_error",
    "exclusion_error",
    "reach",
    "avg_transfer_given_positive",
)
CSV_COLUMNS: tuple[str, ...] = (
    "snr",
    "replication",
    "rule",
    *METRIC_COLUMNS,
    "spend",
    "no_recipients",
    "multiplier",
    "shrink_factor",
    "budget_slack",
    "error",
)


def records_to_frame(records: Iterable[ReplicationRecord]) -> pd.DataFrame:
    rows: list[dict[str, Any]] = []
    for record in records:
        metrics = record.metrics
        row: dict[str, Any] = {
            "snr": record.snr,
            "replication": record.replication,
            "rule": record.rule,
            "spend": record.spend,
            "no_recipients": metrics.no_recipients if metrics else None,
            "multiplier": record.multiplier,
            "shrink_factor": record.shrink_factor,
            "budget_slack": record.budget_slack,
            "error": record.error or "",
        }
        for column in METRIC_COLUMNS:
            row[column] = getattr(metrics, column) if metrics else None
        rows.append(row)
    return pd.DataFrame(rows, columns=list(CSV_COLUMNS))


def write_replications_csv(frame: pd.DataFrame, path: Path) -> Path:
    frame.to_csv(path, index=False, lineterminator="\n")
    return path


def _clean(value: Any) -> Optional[float]:
    if value is None:
        return None
    value = float(value)
    return None if math.isnan(value) else value


def _describe(series: pd.Series) -> dict[str, Optional[float]]:
    return {
        "mean": _clean(series.mean()),
        "min": _clean(series.min()),
        "max": _clean(series.max()),
        "std": _clean(series.std(ddof=1)),
    }


def _paired(frame: pd.DataFrame, rule: str, other: str, column: str) -> Optional[tuple[pd.Series, pd.Series]]:
    a = frame[frame["rule"] == rule].set_index("replication")[column].dropna()
    b = frame[frame["rule"] == other].set_index("replication")[column].dropna()
    common = a.index.intersection(b.index)
    if common.empty:
        return None
    return a.loc[common], b.loc[common]


def summarize(frame: pd.DataFrame) -> dict[str, Any]:
    """
    Aggregate per (snr, rule): loss-ratio mean/min/max/std, metric means, share
    of replications with unspent budget, win rate against plug-in and paired
    regret against the oracle when those rules are present.
    """
    groups: list[dict[str, Any]] = []
    for snr in pd.unique(frame["snr"]):
        at_snr = frame[frame["snr"] == snr]
        for rule in pd.unique(at_snr["rule"]):
            rows = at_snr[at_snr["rule"] == rule]
            ok = rows[rows["error"] == ""]
            entry: dict[str, Any] = {
                "snr": float(snr),
                "rule": str(rule),
                "replications": int(len(rows)),
                "errors": int(len(rows) - len(ok)),
                "loss_ratio": _describe(ok["loss_ratio"]),
                "means": {column: _clean(ok[column].mean()) for column in (*METRIC_COLUMNS, "spend")},
                "budget_slack_share": _clean(ok["budget_slack"].astype(float).mean()),
            }

            if rule != RuleKind.PLUG_IN.value:
                paired = _paired(at_snr, rule, RuleKind.PLUG_IN.value, "loss_ratio")
                if paired is not None:
                    entry["win_rate_vs_plug_in"] = paired_win_rate(*paired)

            if rule != RuleKind.ORACLE_BAYES.value:
                paired = _paired(at_snr, rule, RuleKind.ORACLE_BAYES.value, "loss")
                if paired is not None:
                    regret = bayes_regret_estimate(*paired)
                    entry["regret_vs_oracle"] = {"mean": regret.mean, "std_error": regret.std_error}
            groups.append(entry)

    return {"groups": groups, "total_records": int(len(frame)), "error_records": int((frame["error"] != "").sum())}


def write_summary_json(summary: dict[str, Any], path: Path) -> Path:
    with open(path, "w", newline="\n") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path
