"""
Boxplots of per-replication loss ratios, one SVG per SNR level.

Rendering is pinned (Agg backend, fixed SVG id salt, no date stamp) so a
rerun of the same experiment writes the same bytes.
"""
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import pandas as pd  # noqa: E402

from src.rules.decision_rules import RuleKind  # noqa: E402

_SVG_SALT: str = "targeting"


def loss_ratio_boxplot(frame: pd.DataFrame, snr: float, path: Path) -> Path:
    """
    Draw the loss-ratio distribution of every rule at one SNR level.

    UBI is deterministic across replications and is drawn as a dashed
    reference line instead of a box.

    :param frame: replication rows as produced by ``records_to_frame``
    :param snr: the SNR level to draw
    :param path: destination ``.svg`` file
    """
    rows = frame[(frame["snr"] == snr) & (frame["error"] == "")]
    boxed = [r for r in pd.unique(rows["rule"]) if r != RuleKind.UBI.value]

    with plt.rc_context({"svg.hashsalt": _SVG_SALT, "svg.fonttype": "none"}):
        fig, ax = plt.subplots(figsize=(7, 4))
        if boxed:
            ax.boxplot([rows.loc[rows["rule"] == r, "loss_ratio"].astype(float) for r in boxed], showfliers=True)
            ax.set_xticks(range(1, len(boxed) + 1), boxed)
        ubi = rows.loc[rows["rule"] == RuleKind.UBI.value, "loss_ratio"]
        if not ubi.empty:
            ax.axhline(float(ubi.mean()), linestyle="--", color="grey", label=RuleKind.UBI.value)
            ax.legend(loc="lower right")
        ax.axhline(0.0, linewidth=0.5, color="black")
        ax.set_ylabel("loss ratio")
        ax.set_title(f"SNR = {snr:g}")
        fig.tight_layout()
        fig.savefig(path, format="svg", metadata={"Date": None})
        plt.close(fig)
    return path
