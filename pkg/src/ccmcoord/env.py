"""Continuous bounded 2-D predator-prey pursuit.

Three identical predators (indices 0-2) chase one prey (index 3) inside the
square ``[-h, h]^2``. Each step a predator overlapping the prey earns
``contact_reward`` and the prey loses the same amount per contacting predator,
so rewards sum to zero. Particles pass through each other.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import InvalidInputError

N_PREDATORS = 3
N_AGENTS = 4
PREY = 3
OBS_DIM = 4 + (N_AGENTS - 1) * 4

# others[i] lists every agent except i, in index order
_OTHERS = np.array([[j for j in range(N_AGENTS) if j != i] for i in range(N_AGENTS)])


@dataclass(frozen=True)
class EnvConfig:
    arena_half_width: float = 1.0
    dt: float = 0.1
    damping: float = 0.25
    max_speed_predator: float = 1.0
    max_speed_prey: float = 1.3
    radius_predator: float = 0.05
    radius_prey: float = 0.04
    accel_scale: float = 3.0
    episode_length: int = 200
    contact_reward: float = 1.0

    def __post_init__(self):
        for name in (
            "arena_half_width", "dt", "max_speed_predator", "max_speed_prey",
            "radius_predator", "radius_prey", "accel_scale", "contact_reward",
        ):
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0):
                raise InvalidInputError(f"{name} must be positive, got {v}", field=name)
        if not 0 <= self.damping < 1:
            raise InvalidInputError(f"damping must lie in [0, 1), got {self.damping}", field="damping")
        if isinstance(self.episode_length, bool) or int(self.episode_length) != self.episode_length or self.episode_length < 1:
            raise InvalidInputError("episode_length must be a positive integer", field="episode_length")
        if self.radius_predator + self.radius_prey >= self.arena_half_width:
            raise InvalidInputError("radii sum must be below arena_half_width", field="radius_predator")

    @property
    def contact_distance(self) -> float:
        return self.radius_predator + self.radius_prey

    @property
    def max_speeds(self) -> np.ndarray:
        return np.array([self.max_speed_predator] * N_PREDATORS + [self.max_speed_prey])


@dataclass(frozen=True)
class WorldState:
    positions: np.ndarray
    velocities: np.ndarray
    scores: np.ndarray = field(default_factory=lambda: np.zeros(N_AGENTS))
    step_count: int = 0


@dataclass(frozen=True)
class StepResult:
    next_state: WorldState
    rewards: np.ndarray
    contacts: list[int]
    done: bool


def predator_prey_distances(positions: np.ndarray) -> np.ndarray:
    diff = positions[:N_PREDATORS] - positions[PREY]
    return np.sqrt(np.sum(diff * diff, axis=1))


def _in_contact(positions: np.ndarray, config: EnvConfig) -> bool:
    return bool(np.any(predator_prey_distances(positions) < config.contact_distance))


def reset(config: EnvConfig, seed) -> WorldState:
    """Uniform random placement with no predator touching the prey."""
    rng = np.random.default_rng(seed)
    h = config.arena_half_width
    for _ in range(1000):
        pos = rng.uniform(-h, h, size=(N_AGENTS, 2))
        if not _in_contact(pos, config):
            return WorldState(pos, np.zeros((N_AGENTS, 2)), np.zeros(N_AGENTS), 0)
    raise RuntimeError("could not place agents without contact after 1000 attempts")


def step(state: WorldState, joint_action, config: EnvConfig) -> StepResult:
    """Advance one step with semi-implicit Euler, speed caps and wall clamping."""
    a = np.asarray(joint_action, dtype=np.float64)
    if a.shape != (N_AGENTS, 2):
        raise InvalidInputError(f"joint_action must have shape (4, 2), got {a.shape}")
    if not np.all(np.isfinite(a)):
        raise InvalidInputError("joint_action contains a non-finite value")
    a = np.clip(a, -1.0, 1.0)

    v = (1.0 - config.damping) * state.velocities + config.accel_scale * config.dt * a
    speed = np.sqrt(np.sum(v * v, axis=1))
    caps = config.max_speeds
    over = speed > caps
    if np.any(over):
        v[over] *= (caps[over] / speed[over])[:, None]
    p = state.positions + v * config.dt
    h = config.arena_half_width
    outside = np.abs(p) > h
    if np.any(outside):
        p = np.clip(p, -h, h)
        v[outside] = 0.0

    contacts = [int(i) for i in np.flatnonzero(predator_prey_distances(p) < config.contact_distance)]
    rewards = np.zeros(N_AGENTS)
    rewards[contacts] = config.contact_reward
    rewards[PREY] = -config.contact_reward * len(contacts)
    n = state.step_count + 1
    nxt = WorldState(p, v, state.scores + rewards, n)
    return StepResult(nxt, rewards, contacts, n == config.episode_length)


def observe_all(state: WorldState) -> np.ndarray:
    """Observations of every agent stacked as a ``(4, 16)`` array."""
    pos, vel = state.positions, state.velocities
    rel_p = pos[_OTHERS] - pos[:, None, :]
    rel_v = vel[_OTHERS] - vel[:, None, :]
    others = np.concatenate([rel_p, rel_v], axis=2).reshape(N_AGENTS, -1)
    return np.concatenate([pos, vel, others], axis=1)


def observe(state: WorldState, agent_id: int) -> np.ndarray:
    """Own position and velocity, then relative position and velocity of each other agent."""
    if isinstance(agent_id, bool) or agent_id not in range(N_AGENTS):
        raise InvalidInputError(f"agent_id must be in 0..{N_AGENTS - 1}, got {agent_id!r}")
    return observe_all(state)[agent_id]


def scripted_prey(state: WorldState, rng, config: EnvConfig = EnvConfig(), jitter: float = 0.05) -> np.ndarray:
    """Flee the nearest predator, steer off nearby walls, add Gaussian jitter.

    The wall term on each axis is ``2 * (1 - gap / margin)**2`` inside a margin
    of 10% of the half-width, so at a wall it outweighs a unit flee vector.
    """
    pos = state.positions
    prey = pos[PREY]
    d = predator_prey_distances(pos)
    nearest = int(np.argmin(d))
    away = prey - pos[nearest]
    norm = float(np.hypot(away[0], away[1]))
    flee = away / norm if norm > 0 else np.zeros(2)

    h = config.arena_half_width
    margin = 0.1 * h
    gap_low = prey + h
    gap_high = h - prey
    push = np.where(gap_low < margin, 2.0 * (1 - gap_low / margin) ** 2, 0.0)
    push -= np.where(gap_high < margin, 2.0 * (1 - gap_high / margin) ** 2, 0.0)

    action = flee + push
    if jitter > 0:
        action = action + jitter * rng.standard_normal(2)
    return np.clip(action, -1.0, 1.0)


def with_positions(state: WorldState, positions, velocities=None) -> WorldState:
    """Copy of ``state`` with replaced kinematics; handy for tests and scripted setups."""
    pos = np.array(positions, dtype=np.float64)
    vel = np.zeros_like(pos) if velocities is None else np.array(velocities, dtype=np.float64)
    return replace(state, positions=pos, velocities=vel)
