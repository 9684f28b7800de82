"""Single training runs: rollout, coordination bonus, REINFORCE update, per-episode metrics."""

from __future__ import annotations

import json
import logging
import math
import time
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .. import env as pe
from ..agents import (
    LearnerState,
    bonuses_from_summary,
    measure_coordination,
    policy_init,
    reinforce_update,
    rollout,
    save_checkpoint,
)
from .config import ExperimentConfig, config_digest, config_to_dict, resolve_output_dir

log = logging.getLogger(__name__)

FINAL_WINDOW_FRACTION = 0.1


def final_window(n_episodes: int) -> int:
    return max(1, math.ceil(FINAL_WINDOW_FRACTION * n_episodes))


@dataclass
class RunArtifacts:
    run_dir: Path
    metrics_path: Path
    checkpoints: list[Path]
    config_digest: str
    seed: int
    metrics: list[dict] = field(default_factory=list)
    wall_clock_s: float = 0.0


def _episode_rng(seed: int, episode: int, stream: int) -> np.random.Generator:
    return np.random.default_rng([seed, episode, stream])


def _round(values) -> list[float]:
    return [float(v) for v in values]


def predator_ccm(pair_scores: np.ndarray) -> float:
    sub = pair_scores[: pe.N_PREDATORS, : pe.N_PREDATORS]
    off = ~np.eye(pe.N_PREDATORS, dtype=bool)
    return float(np.mean(sub[off]))


def run_training(
    config: ExperimentConfig,
    seed: int,
    run_dir=None,
    shaping_enabled: bool = True,
) -> RunArtifacts:
    """Train the predators (and the prey if ``config.prey == "learner"``) for ``config.episodes`` episodes.

    One JSON line per episode goes to ``metrics.jsonl`` as soon as the episode
    finishes. ``shaping_enabled=False`` skips the bonus entirely while still
    measuring coordination for the metrics. If training fails, a truncation
    record is appended before the exception propagates.
    """
    digest = config_digest(config)
    run_dir = Path(run_dir) if run_dir is not None else resolve_output_dir(config) / f"seed{seed}"
    run_dir.mkdir(parents=True, exist_ok=True)
    metrics_path = run_dir / "metrics.jsonl"
    learners = list(range(pe.N_AGENTS if config.prey == "learner" else pe.N_PREDATORS))
    states = {i: LearnerState.fresh(policy_init([seed, i])) for i in learners}
    ccm_params = config.ccm.params
    artifacts = RunArtifacts(run_dir, metrics_path, [], digest, seed)
    started = time.perf_counter()

    with metrics_path.open("w") as fh:
        episode = 0
        try:
            for episode in range(config.episodes):
                policies = [states[i].params if i in states else None for i in range(pe.N_AGENTS)]
                batch = rollout(config.env, policies, None, _episode_rng(seed, episode, 0))
                summary = measure_coordination(
                    batch, config.shaping, ccm_params, config.ccm.n_draws, _episode_rng(seed, episode, 1)
                )
                if shaping_enabled:
                    bonus = bonuses_from_summary(summary, config.shaping)
                else:
                    bonus = np.zeros(pe.N_AGENTS)
                stats = {}
                for i in learners:
                    states[i], stats[i] = reinforce_update(states[i], batch, i, bonus[i], config.learner)
                record = {
                    "config_digest": digest,
                    "seed": seed,
                    "episode": episode,
                    "contacts": int(batch.contacts.sum()),
                    "env_return": _round(batch.env_returns()),
                    "bonus": _round(bonus),
                    "coordination": summary.to_dict(),
                    "predator_ccm": predator_ccm(summary.pair_scores),
                    "grad_norm": _round(stats[i].grad_norm for i in learners),
                    "advantage": _round(stats[i].advantage for i in learners),
                    "return": _round(stats[i].ret for i in learners),
                    "log_std": [_round(states[i].params.log_std) for i in learners],
                }
                fh.write(json.dumps(record, sort_keys=True) + "\n")
                fh.flush()
                artifacts.metrics.append(record)
        except Exception as err:
            fh.write(json.dumps({"truncated": True, "episode": episode, "error": repr(err)}) + "\n")
            fh.flush()
            raise

    ckpt_dir = run_dir / "checkpoints"
    ckpt_dir.mkdir(exist_ok=True)
    for i in learners:
        path = ckpt_dir / f"agent{i}.ckpt"
        save_checkpoint(path, states[i].params, states[i].baseline)
        artifacts.checkpoints.append(path)
    artifacts.wall_clock_s = time.perf_counter() - started
    meta = {
        "config_digest": digest,
        "seed": seed,
        "episodes": config.episodes,
        "shaping_enabled": shaping_enabled,
        "wall_clock_s": artifacts.wall_clock_s,
        "config": config_to_dict(config),
    }
    (run_dir / "run.json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
    log.info("seed %d: %d episodes in %.1fs -> %s", seed, config.episodes, artifacts.wall_clock_s, run_dir)
    return artifacts


def read_metrics(path) -> list[dict]:
    with open(path) as fh:
        return [json.loads(line) for line in fh if line.strip()]


def window_summary(records: list[dict], first: bool = False) -> dict:
    """Means over the final (or first) 10% of episodes."""
    records = [r for r in records if not r.get("truncated")]
    w = final_window(len(records))
    sel = records[:w] if first else records[-w:]
    returns = np.array([r["env_return"] for r in sel])
    return {
        "window_episodes": w,
        "contacts": float(np.mean([r["contacts"] for r in sel])),
        "predator_return": _round(returns[:, : pe.N_PREDATORS].mean(axis=0)),
        "prey_return": float(returns[:, pe.PREY].mean()),
        "predator_ccm": float(np.mean([r["predator_ccm"] for r in sel])),
        "overall_ccm": float(np.mean([r["coordination"]["overall_mean"] for r in sel])),
    }


def with_theta(config: ExperimentConfig, theta: float) -> ExperimentConfig:
    return replace(config, shaping=replace(config.shaping, theta=float(theta)))
