"""Per-stage training metrics as CSV.

Every file starts with one comment line carrying the config hash and seed,
then the fixed header below, then one row per iteration::

    # config_hash=<sha256> seed=<int> stage=<id>
    iteration,wall_s,mean_ep_reward,mean_ep_len,term_timeout,term_fell,term_flip,loss_surrogate,loss_value,entropy,kl,lr

Floats are written with ``repr`` so a file reproduces bit-for-bit.
``mean_ep_reward`` and ``mean_ep_len`` are ``nan`` until the first episode
of the stage finishes.
"""
from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

log = logging.getLogger(__name__)

HEADER = ("iteration", "wall_s", "mean_ep_reward", "mean_ep_len", "term_timeout", "term_fell", "term_flip",
          "loss_surrogate", "loss_value", "entropy", "kl", "lr")
_INT_COLUMNS = {"iteration", "term_timeout", "term_fell", "term_flip"}


def stats_row(stats) -> dict:
    return {
        "iteration": stats.iteration, "wall_s": stats.wall_s,
        "mean_ep_reward": stats.mean_ep_reward, "mean_ep_len": stats.mean_ep_len,
        "term_timeout": stats.term_timeout, "term_fell": stats.term_fell, "term_flip": stats.term_flip,
        "loss_surrogate": stats.surrogate, "loss_value": stats.value, "entropy": stats.entropy,
        "kl": stats.kl, "lr": stats.learning_rate,
    }


def _fmt(v):
    return str(v) if isinstance(v, int) else repr(float(v))


class MetricsWriter:
    """Append-only CSV writer; rows must arrive with strictly increasing iteration."""

    def __init__(self, path, config_hash: str, seed: int, stage: str = ""):
        self.path = Path(path)
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self._fh = open(self.path, "w", newline="")
        self._fh.write(f"# config_hash={config_hash} seed={seed} stage={stage}\n")
        self._fh.write(",".join(HEADER) + "\n")
        self._fh.flush()
        self._last = -1

    def write(self, stats) -> None:
        row = stats_row(stats)
        if row["iteration"] <= self._last:
            raise ValueError(f"iteration {row['iteration']} does not follow {self._last}")
        self._last = row["iteration"]
        self._fh.write(",".join(_fmt(row[k]) for k in HEADER) + "\n")
        self._fh.flush()

    def close(self) -> None:
        self._fh.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


@dataclass
class MetricsFile:
    path: Path
    meta: dict = field(default_factory=dict)
    rows: list = field(default_factory=list)
    skipped: int = 0

    def column(self, name):
        return [r[name] for r in self.rows]

    @property
    def label(self) -> str:
        return self.meta.get("stage") or self.path.stem


def read_metrics(path) -> MetricsFile:
    """Parse a metrics CSV; malformed rows are skipped, counted and logged."""
    path = Path(path)
    out = MetricsFile(path)
    with open(path, newline="") as fh:
        lines = fh.read().splitlines()
    body = []
    for line in lines:
        if line.startswith("#"):
            for tok in line[1:].split():
                if "=" in tok:
                    k, v = tok.split("=", 1)
                    out.meta[k] = v
        elif line.strip():
            body.append(line)
    if not body:
        return out
    reader = csv.reader(body)
    header = next(reader)
    if tuple(header) != HEADER:
        raise ValueError(f"{path}: unexpected header {','.join(header)!r}")
    for lineno, rec in enumerate(reader, start=2):
        try:
            if len(rec) != len(HEADER):
                raise ValueError(f"{len(rec)} fields")
            row = {k: (int(v) if k in _INT_COLUMNS else float(v)) for k, v in zip(HEADER, rec)}
        except ValueError as exc:
            out.skipped += 1
            log.warning("%s: skipping malformed row %d (%s)", path, lineno, exc)
            continue
        out.rows.append(row)
    return out


def nanmean(values) -> float:
    vals = [v for v in values if not math.isnan(v)]
    return sum(vals) / len(vals) if vals else math.nan
