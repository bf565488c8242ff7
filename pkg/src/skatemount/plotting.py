"""Reward-vs-iteration curves from metrics files."""
from __future__ import annotations

import logging
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from .metrics import read_metrics  # noqa: E402

log = logging.getLogger(__name__)


def plot_reward_curves(paths, output, title="Mean episode reward"):
    """Overlay one curve per metrics file; returns ``(output path or None, skipped row count)``.

    Nothing is written when no file has a usable row.
    """
    files = [read_metrics(p) for p in paths]
    skipped = sum(f.skipped for f in files)
    usable = [f for f in files if f.rows]
    for f in files:
        if not f.rows:
            log.warning("%s: no data rows", f.path)
    if not usable:
        return None, skipped
    fig, ax = plt.subplots(figsize=(7, 4))
    for f in usable:
        ax.plot(f.column("iteration"), f.column("mean_ep_reward"), label=f.label)
    ax.set_xlabel("iteration")
    ax.set_ylabel("mean episode reward")
    ax.set_title(title)
    ax.grid(alpha=0.3)
    ax.legend()
    fig.tight_layout()
    output = Path(output)
    output.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(output)
    plt.close(fig)
    return output, skipped
