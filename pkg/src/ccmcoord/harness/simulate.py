"""Roll out episodes and dump trajectories as CSV."""

from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

from .. import env as pe
from ..agents import TrajectoryBatch, load_checkpoint, policy_init, rollout
from .config import ExperimentConfig

DUMP_FIELDS = ["episode", "step", "agent_id", "px", "py", "vx", "vy", "ax", "ay", "reward"]


def load_policies(config: ExperimentConfig, seed: int, checkpoint_dir=None) -> list:
    """Initial policies for ``seed``, replaced by checkpoints found in ``checkpoint_dir``."""
    n_learners = pe.N_AGENTS if config.prey == "learner" else pe.N_PREDATORS
    policies = [policy_init([seed, i]) if i < n_learners else None for i in range(pe.N_AGENTS)]
    if checkpoint_dir is not None:
        for i in range(n_learners):
            path = Path(checkpoint_dir) / f"agent{i}.ckpt"
            if path.exists():
                policies[i], _ = load_checkpoint(path)
    return policies


def batch_rows(batch: TrajectoryBatch, episode: int):
    for t in range(batch.length):
        for i in range(pe.N_AGENTS):
            px, py = batch.positions[t, i]
            vx, vy = batch.velocities[t, i]
            ax, ay = batch.actions[i, t]
            yield [episode, t, i, px, py, vx, vy, ax, ay, batch.rewards[i, t]]


def simulate(config: ExperimentConfig, seed: int, dump_path, episodes: int = 1, checkpoint_dir=None) -> list[TrajectoryBatch]:
    """Play ``episodes`` episodes without learning; positions are recorded after each step."""
    policies = load_policies(config, seed, checkpoint_dir)
    batches = []
    dump_path = Path(dump_path)
    dump_path.parent.mkdir(parents=True, exist_ok=True)
    with dump_path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(DUMP_FIELDS)
        for ep in range(episodes):
            batch = rollout(config.env, policies, None, np.random.default_rng([seed, ep, 0]))
            batches.append(batch)
            for row in batch_rows(batch, ep):
                w.writerow([v if isinstance(v, int) else repr(float(v)) for v in row])
    return batches


def read_dump(path) -> dict[str, np.ndarray]:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    return {k: np.array([float(r[k]) for r in rows]) for k in DUMP_FIELDS}
