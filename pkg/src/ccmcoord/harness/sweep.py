"""Threshold sweeps: one training run per (theta, seed) cell, summarized to CSV."""

from __future__ import annotations

import csv
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

from .. import env as pe
from .config import ExperimentConfig, resolve_output_dir
from .training import run_training, window_summary, with_theta

log = logging.getLogger(__name__)

SUMMARY_FIELDS = (
    ["theta", "seed", "status", "config_digest", "window_episodes", "contacts"]
    + [f"predator{i}_return" for i in range(pe.N_PREDATORS)]
    + ["prey_return", "predator_ccm", "overall_ccm"]
)


@dataclass
class SweepSummary:
    rows: list[dict]
    path: Path

    def cell(self, theta: float, seed: int) -> dict:
        for row in self.rows:
            if row["theta"] == theta and row["seed"] == seed:
                return row
        raise KeyError((theta, seed))


def cell_dir(root: Path, theta: float, seed: int) -> Path:
    return root / f"theta{theta:g}_seed{seed}"


def _run_cell(args) -> dict:
    config, theta, seed, root = args
    row = {"theta": theta, "seed": seed}
    try:
        art = run_training(with_theta(config, theta), seed, cell_dir(root, theta, seed))
    except Exception as err:  # a failed cell must not stop the sweep
        log.exception("cell theta=%s seed=%s failed", theta, seed)
        row["status"] = f"failed: {err!r}"
        return row
    win = window_summary(art.metrics)
    row.update(
        status="ok",
        config_digest=art.config_digest,
        window_episodes=win["window_episodes"],
        contacts=win["contacts"],
        prey_return=win["prey_return"],
        predator_ccm=win["predator_ccm"],
        overall_ccm=win["overall_ccm"],
    )
    for i, v in enumerate(win["predator_return"]):
        row[f"predator{i}_return"] = v
    return row


def sweep_threshold(
    config: ExperimentConfig,
    thetas,
    seeds,
    workers: int = 1,
    root=None,
) -> SweepSummary:
    """Train every (theta, seed) cell and write ``summary.csv`` under ``root``.

    Cells own their output directories, so results do not depend on
    ``workers`` or scheduling order.
    """
    thetas = [float(t) for t in thetas]
    seeds = [int(s) for s in seeds]
    if not thetas or not seeds:
        raise ValueError("sweep needs at least one theta and one seed")
    root = Path(root) if root is not None else resolve_output_dir(config) / "sweep"
    root.mkdir(parents=True, exist_ok=True)
    jobs = [(config, t, s, root) for t in thetas for s in seeds]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_run_cell, jobs))
    else:
        rows = [_run_cell(job) for job in jobs]
    rows.sort(key=lambda r: (r["theta"], r["seed"]))
    path = root / "summary.csv"
    with path.open("w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=SUMMARY_FIELDS, restval="")
        writer.writeheader()
        writer.writerows(rows)
    return SweepSummary(rows, path)
