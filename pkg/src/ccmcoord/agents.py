"""Gaussian MLP policies trained with REINFORCE plus a CCM coordination bonus."""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from . import env as pe
from .ccm import EmbeddingParams, CoordinationSummary, pairwise_coordination
from .errors import InvalidInputError

HIDDEN = 32
ACT_DIM = 2
N_PARAMS = pe.OBS_DIM * HIDDEN + HIDDEN + HIDDEN * ACT_DIM + ACT_DIM + ACT_DIM
_LOG_2PI = math.log(2 * math.pi)

CHECKPOINT_MAGIC = "ccmcoord-policy-checkpoint"
CHECKPOINT_VERSION = 1
ARCHITECTURE = f"obs{pe.OBS_DIM}-tanh{HIDDEN}-gauss{ACT_DIM}"


@dataclass(frozen=True)
class PolicyParams:
    """obs(16) -> tanh(32) -> action mean(2), plus a learnable log std per action."""

    w1: np.ndarray
    b1: np.ndarray
    w2: np.ndarray
    b2: np.ndarray
    log_std: np.ndarray

    _SHAPES = ((pe.OBS_DIM, HIDDEN), (HIDDEN,), (HIDDEN, ACT_DIM), (ACT_DIM,), (ACT_DIM,))

    def flat(self) -> np.ndarray:
        return np.concatenate([a.ravel() for a in (self.w1, self.b1, self.w2, self.b2, self.log_std)])

    @classmethod
    def from_flat(cls, vec) -> "PolicyParams":
        vec = np.asarray(vec, dtype=np.float64)
        if vec.shape != (N_PARAMS,):
            raise InvalidInputError(f"expected {N_PARAMS} parameters, got shape {vec.shape}")
        parts, start = [], 0
        for shape in cls._SHAPES:
            size = int(np.prod(shape))
            parts.append(vec[start:start + size].reshape(shape).copy())
            start += size
        return cls(*parts)

    @classmethod
    def zeros(cls) -> "PolicyParams":
        return cls.from_flat(np.zeros(N_PARAMS))


def policy_init(seed) -> PolicyParams:
    """Uniform(+-1/sqrt(fan_in)) weights, zero biases, log std -0.5."""
    rng = np.random.default_rng(seed)
    s1 = 1.0 / math.sqrt(pe.OBS_DIM)
    s2 = 1.0 / math.sqrt(HIDDEN)
    return PolicyParams(
        w1=rng.uniform(-s1, s1, (pe.OBS_DIM, HIDDEN)),
        b1=np.zeros(HIDDEN),
        w2=rng.uniform(-s2, s2, (HIDDEN, ACT_DIM)),
        b2=np.zeros(ACT_DIM),
        log_std=np.full(ACT_DIM, -0.5),
    )


def policy_mean(params: PolicyParams, obs: np.ndarray) -> np.ndarray:
    return np.tanh(obs @ params.w1 + params.b1) @ params.w2 + params.b2


def gaussian_log_prob(raw: np.ndarray, mean: np.ndarray, log_std: np.ndarray) -> np.ndarray:
    z = (raw - mean) * np.exp(-log_std)
    return np.sum(-0.5 * z * z - log_std - 0.5 * _LOG_2PI, axis=-1)


def policy_act(params: PolicyParams, obs, rng, deterministic: bool = False):
    """Sample an action; returns ``(clamped_action, raw_action, log_prob_of_raw)``."""
    obs = np.asarray(obs, dtype=np.float64)
    if obs.shape != (pe.OBS_DIM,):
        raise InvalidInputError(f"obs must have length {pe.OBS_DIM}, got shape {obs.shape}")
    if not np.all(np.isfinite(obs)):
        raise InvalidInputError("obs contains a non-finite value")
    mean = policy_mean(params, obs)
    if deterministic:
        raw = mean
    else:
        raw = mean + np.exp(params.log_std) * rng.standard_normal(ACT_DIM)
    return np.clip(raw, -1.0, 1.0), raw, float(gaussian_log_prob(raw, mean, params.log_std))


@dataclass
class TrajectoryBatch:
    """One episode, all four agents.

    Per-agent arrays are indexed ``[agent, t]``. ``positions``/``velocities``
    hold the state after each step. Scripted agents have ``learner[i]`` False
    and zero log-probabilities.
    """

    observations: np.ndarray
    raw_actions: np.ndarray
    actions: np.ndarray
    log_probs: np.ndarray
    rewards: np.ndarray
    timestamps: np.ndarray
    positions: np.ndarray
    velocities: np.ndarray
    contacts: np.ndarray
    learner: np.ndarray
    seed: int | None = None
    config_digest: str | None = None

    @property
    def length(self) -> int:
        return self.timestamps.size

    def env_returns(self) -> np.ndarray:
        return self.rewards.sum(axis=1)


Policy = PolicyParams | None


def rollout(
    config: pe.EnvConfig,
    policies: Sequence[Policy],
    T: int | None,
    rng: np.random.Generator,
    deterministic: bool = False,
    prey_jitter: float = 0.05,
) -> TrajectoryBatch:
    """Run one episode of ``T`` steps (default ``config.episode_length``).

    ``policies`` has one entry per agent; ``None`` in slot 3 selects the
    scripted prey. Predators must be policies.
    """
    if len(policies) != pe.N_AGENTS:
        raise InvalidInputError(f"need {pe.N_AGENTS} policy slots, got {len(policies)}")
    if any(p is None for p in policies[: pe.N_PREDATORS]):
        raise InvalidInputError("predator slots require a policy")
    T = config.episode_length if T is None else int(T)
    if T < 1:
        raise InvalidInputError("T must be >= 1")

    reset_seed = int(rng.integers(2**63))
    prey_rng = np.random.default_rng(int(rng.integers(2**63)))
    noise = rng.standard_normal((T, pe.N_AGENTS, ACT_DIM))
    learner = np.array([p is not None for p in policies])
    active = [i for i in range(pe.N_AGENTS) if learner[i]]
    stds = {i: np.exp(policies[i].log_std) for i in active}

    obs_buf = np.zeros((pe.N_AGENTS, T, pe.OBS_DIM))
    raw_buf = np.zeros((pe.N_AGENTS, T, ACT_DIM))
    act_buf = np.zeros((pe.N_AGENTS, T, ACT_DIM))
    rew_buf = np.zeros((pe.N_AGENTS, T))
    pos_buf = np.zeros((T, pe.N_AGENTS, 2))
    vel_buf = np.zeros((T, pe.N_AGENTS, 2))
    contacts = np.zeros(T, dtype=int)

    state = pe.reset(config, reset_seed)
    for t in range(T):
        obs = pe.observe_all(state)
        obs_buf[:, t] = obs
        for i in active:
            p = policies[i]
            mean = np.tanh(obs[i] @ p.w1 + p.b1) @ p.w2 + p.b2
            raw_buf[i, t] = mean if deterministic else mean + stds[i] * noise[t, i]
        if not learner[pe.PREY]:
            raw_buf[pe.PREY, t] = pe.scripted_prey(state, prey_rng, config, prey_jitter)
        act_buf[:, t] = np.clip(raw_buf[:, t], -1.0, 1.0)
        res = pe.step(state, act_buf[:, t], config)
        state = res.next_state
        rew_buf[:, t] = res.rewards
        pos_buf[t] = state.positions
        vel_buf[t] = state.velocities
        contacts[t] = len(res.contacts)

    logp = np.zeros((pe.N_AGENTS, T))
    for i in active:
        p = policies[i]
        logp[i] = gaussian_log_prob(raw_buf[i], policy_mean(p, obs_buf[i]), p.log_std)
    return TrajectoryBatch(
        observations=obs_buf,
        raw_actions=raw_buf,
        actions=act_buf,
        log_probs=logp,
        rewards=rew_buf,
        timestamps=np.arange(T),
        positions=pos_buf,
        velocities=vel_buf,
        contacts=contacts,
        learner=learner,
        seed=reset_seed,
    )


@dataclass(frozen=True)
class ShapingConfig:
    """Coordination shaping: bonus_i = -kappa * |clip(C_i, 0, 1) - theta|.

    ``form="quadratic"`` squares the deviation instead. ``ccm_L`` is the
    library size used for the in-training CCM scores.
    """

    theta: float = 0.5
    kappa: float = 1.0
    ccm_L: int = 198
    pairs: str = "predators_only"
    scalarization: str = "x_component_mean"
    form: str = "abs"

    def __post_init__(self):
        if not 0.0 <= self.theta <= 1.0:
            raise InvalidInputError(f"theta must lie in [0, 1], got {self.theta}", field="theta")
        if not self.kappa >= 0.0:
            raise InvalidInputError(f"kappa must be >= 0, got {self.kappa}", field="kappa")
        if isinstance(self.ccm_L, bool) or int(self.ccm_L) != self.ccm_L or self.ccm_L < 1:
            raise InvalidInputError("ccm_L must be a positive integer", field="ccm_L")
        if self.pairs not in ("predators_only", "all_pairs"):
            raise InvalidInputError(f"unknown pairs {self.pairs!r}", field="pairs")
        if self.scalarization not in ("x_component_mean", "heading_angle"):
            raise InvalidInputError(f"unknown scalarization {self.scalarization!r}", field="scalarization")
        if self.form not in ("abs", "quadratic"):
            raise InvalidInputError(f"unknown form {self.form!r}", field="form")

    def agents(self) -> list[int]:
        return list(range(pe.N_PREDATORS)) if self.pairs == "predators_only" else list(range(pe.N_AGENTS))


def scalarize(actions: np.ndarray, how: str) -> np.ndarray:
    """Reduce ``(T, 2)`` actions to a scalar series per step."""
    if how == "x_component_mean":
        return actions[:, 0]
    if how == "heading_angle":
        return np.unwrap(np.arctan2(actions[:, 1], actions[:, 0]))
    raise InvalidInputError(f"unknown scalarization {how!r}")


def measure_coordination(
    batch: TrajectoryBatch,
    shaping: ShapingConfig,
    ccm_params: EmbeddingParams,
    n_draws: int,
    rng: np.random.Generator,
) -> CoordinationSummary:
    need = max(ccm_params.min_length(), shaping.ccm_L + ccm_params.span)
    if batch.length < need:
        raise InvalidInputError(
            f"episode length {batch.length} too short for E={ccm_params.E}, tau={ccm_params.tau}, "
            f"ccm_L={shaping.ccm_L}: minimum is {need}"
        )
    series = [scalarize(batch.actions[i], shaping.scalarization) for i in shaping.agents()]
    return pairwise_coordination(series, ccm_params, shaping.ccm_L, n_draws, rng)


def bonuses_from_summary(summary: CoordinationSummary, shaping: ShapingConfig) -> np.ndarray:
    bonus = np.zeros(pe.N_AGENTS)
    dev = np.abs(np.clip(summary.per_agent_mean, 0.0, 1.0) - shaping.theta)
    if shaping.form == "quadratic":
        dev = dev * dev
    # 0.0 - x keeps kappa = 0 at +0.0 rather than -0.0
    bonus[shaping.agents()] = 0.0 - shaping.kappa * dev
    return bonus


def coordination_bonus(
    batch: TrajectoryBatch,
    shaping: ShapingConfig,
    ccm_params: EmbeddingParams,
    rng: np.random.Generator,
    n_draws: int = 1,
) -> tuple[np.ndarray, CoordinationSummary]:
    """Per-agent episode-level bonus and the coordination summary it came from."""
    summary = measure_coordination(batch, shaping, ccm_params, n_draws, rng)
    return bonuses_from_summary(summary, shaping), summary


@dataclass(frozen=True)
class LearnerConfig:
    """REINFORCE hyperparameters.

    ``returns="reward_to_go"`` credits each step with the discounted reward
    that follows it; ``"episode"`` uses one discounted return from t=0 for
    every step. ``optimizer="rmsprop"`` divides the gradient by a running
    RMS (decay ``rms_decay``, no momentum); ``"sgd"`` ascends it directly.
    """

    lr: float = 1e-3
    gamma: float = 0.95
    baseline_momentum: float = 0.9
    returns: str = "reward_to_go"
    optimizer: str = "rmsprop"
    rms_decay: float = 0.999

    def __post_init__(self):
        if not self.lr >= 0:
            raise InvalidInputError("lr must be >= 0", field="lr")
        if not 0 <= self.gamma <= 1:
            raise InvalidInputError("gamma must lie in [0, 1]", field="gamma")
        if not 0 <= self.baseline_momentum < 1:
            raise InvalidInputError("baseline_momentum must lie in [0, 1)", field="baseline_momentum")
        if self.returns not in ("reward_to_go", "episode"):
            raise InvalidInputError(f"unknown returns {self.returns!r}", field="returns")
        if self.optimizer not in ("rmsprop", "sgd"):
            raise InvalidInputError(f"unknown optimizer {self.optimizer!r}", field="optimizer")
        if not 0 <= self.rms_decay < 1:
            raise InvalidInputError("rms_decay must lie in [0, 1)", field="rms_decay")


def discounted_return(rewards: np.ndarray, gamma: float) -> float:
    return float(np.dot(gamma ** np.arange(rewards.size), rewards))


def rewards_to_go(rewards: np.ndarray, gamma: float) -> np.ndarray:
    out = np.empty(rewards.size)
    acc = 0.0
    for t in range(rewards.size - 1, -1, -1):
        acc = rewards[t] + gamma * acc
        out[t] = acc
    return out


def step_returns(rewards: np.ndarray, bonus: float, hyper: LearnerConfig) -> np.ndarray:
    """Per-step returns with the episode-level bonus added once to each."""
    if hyper.returns == "episode":
        base = np.full(rewards.size, discounted_return(rewards, hyper.gamma))
    else:
        base = rewards_to_go(rewards, hyper.gamma)
    return base + float(bonus)


def surrogate(params: PolicyParams, obs: np.ndarray, raw: np.ndarray, advantage) -> float:
    """Policy-gradient objective ``sum_t A_t log pi(raw_t | obs_t)``."""
    logp = gaussian_log_prob(raw, policy_mean(params, obs), params.log_std)
    return float(np.sum(np.broadcast_to(advantage, logp.shape) * logp))


def surrogate_grad(params: PolicyParams, obs: np.ndarray, raw: np.ndarray, advantage) -> np.ndarray:
    """Analytic gradient of :func:`surrogate`, flattened like ``params.flat()``."""
    adv = np.broadcast_to(np.asarray(advantage, dtype=np.float64), (obs.shape[0],))[:, None]
    h = np.tanh(obs @ params.w1 + params.b1)
    mean = h @ params.w2 + params.b2
    inv_var = np.exp(-2.0 * params.log_std)
    diff = raw - mean
    d_mean = adv * diff * inv_var
    d_log_std = np.sum(adv * (diff * diff * inv_var - 1.0), axis=0)
    g_w2 = h.T @ d_mean
    g_b2 = d_mean.sum(axis=0)
    d_pre = (d_mean @ params.w2.T) * (1.0 - h * h)
    g_w1 = obs.T @ d_pre
    g_b1 = d_pre.sum(axis=0)
    return np.concatenate([g_w1.ravel(), g_b1, g_w2.ravel(), g_b2, d_log_std])


@dataclass(frozen=True)
class LearnerState:
    """Everything a single agent carries between updates."""

    params: PolicyParams
    baseline: float = 0.0
    second_moment: np.ndarray | None = None
    updates: int = 0

    @classmethod
    def fresh(cls, params: PolicyParams) -> "LearnerState":
        return cls(params, 0.0, np.zeros(N_PARAMS), 0)


@dataclass(frozen=True)
class UpdateStats:
    grad_norm: float
    advantage: float
    ret: float
    baseline: float


class NonFiniteGradientError(ArithmeticError):
    pass


def reinforce_update(
    state: LearnerState,
    batch: TrajectoryBatch,
    agent: int,
    bonus: float,
    hyper: LearnerConfig,
) -> tuple[LearnerState, UpdateStats]:
    """One REINFORCE ascent step for ``agent``.

    Advantages are per-step returns minus the running baseline, which then
    moves toward the mean per-step return. ``stats.ret`` is the return from
    t=0 and ``stats.advantage`` the mean advantage.

    Raises:
        NonFiniteGradientError: the gradient is not finite; nothing is updated.
    """
    G = step_returns(batch.rewards[agent], bonus, hyper)
    A = G - state.baseline
    with np.errstate(invalid="ignore", over="ignore"):
        grad = surrogate_grad(state.params, batch.observations[agent], batch.raw_actions[agent], A)
    if not np.all(np.isfinite(grad)):
        raise NonFiniteGradientError(f"non-finite gradient for agent {agent}")
    updates = state.updates + 1
    sq = state.second_moment if state.second_moment is not None else np.zeros(N_PARAMS)
    if hyper.optimizer == "rmsprop":
        sq = hyper.rms_decay * sq + (1.0 - hyper.rms_decay) * grad * grad
        scale = np.sqrt(sq / (1.0 - hyper.rms_decay**updates)) + 1e-8
        direction = grad / scale
    else:
        direction = grad
    params = PolicyParams.from_flat(state.params.flat() + hyper.lr * direction)
    m = hyper.baseline_momentum
    baseline = m * state.baseline + (1.0 - m) * float(np.mean(G))
    stats = UpdateStats(float(np.linalg.norm(grad)), float(np.mean(A)), float(G[0]), baseline)
    return LearnerState(params, baseline, sq, updates), stats


GradFn = Callable[[PolicyParams, np.ndarray, np.ndarray, object], np.ndarray]


def _surrogate_extended(flat: np.ndarray, obs: np.ndarray, raw: np.ndarray, advantage) -> np.longdouble:
    """:func:`surrogate` evaluated in extended precision from a flat parameter vector."""
    ld = np.longdouble
    parts, start = [], 0
    for shape in PolicyParams._SHAPES:
        size = int(np.prod(shape))
        parts.append(flat[start:start + size].reshape(shape))
        start += size
    w1, b1, w2, b2, log_std = parts
    mean = np.tanh(obs.astype(ld) @ w1 + b1) @ w2 + b2
    z = (raw.astype(ld) - mean) * np.exp(-log_std)
    logp = np.sum(-0.5 * z * z - log_std - ld(0.5 * _LOG_2PI), axis=-1)
    return np.sum(np.broadcast_to(np.asarray(advantage, dtype=ld), logp.shape) * logp)


def grad_check(
    params: PolicyParams,
    obs: np.ndarray,
    raw: np.ndarray,
    advantage,
    epsilon: float = 1e-5,
    grad_fn: GradFn = surrogate_grad,
) -> float:
    """Max relative error between ``grad_fn`` and central finite differences.

    Relative error is ``|a - f| / max(|a|, |f|, 1e-8)`` per parameter. The
    finite differences are taken in extended precision so that cancellation in
    the objective does not swamp partials near the 1e-8 floor.
    """
    analytic = grad_fn(params, obs, raw, advantage)
    base = params.flat().astype(np.longdouble)
    worst = 0.0
    for k in range(base.size):
        hi = base.copy()
        lo = base.copy()
        hi[k] += epsilon
        lo[k] -= epsilon
        diff = _surrogate_extended(hi, obs, raw, advantage) - _surrogate_extended(lo, obs, raw, advantage)
        f = float(diff / (hi[k] - lo[k]))
        a = analytic[k]
        err = abs(a - f) / max(abs(a), abs(f), 1e-8)
        worst = max(worst, err)
    return worst


def save_checkpoint(path, params: PolicyParams, baseline: float) -> None:
    """Text checkpoint: header lines, the baseline, then one parameter per line."""
    lines = [
        f"# {CHECKPOINT_MAGIC}",
        f"# version: {CHECKPOINT_VERSION}",
        f"# architecture: {ARCHITECTURE}",
        f"# n_params: {N_PARAMS}",
        f"baseline {float(baseline)!r}",
    ]
    lines += [repr(float(v)) for v in params.flat()]
    Path(path).write_text("\n".join(lines) + "\n")


def load_checkpoint(path) -> tuple[PolicyParams, float]:
    text = Path(path).read_text().splitlines()
    header = {}
    body = []
    for line in text:
        if line.startswith("#"):
            key, _, value = line[1:].strip().partition(":")
            header[key.strip()] = value.strip()
        elif line.strip():
            body.append(line.strip())
    if CHECKPOINT_MAGIC not in header:
        raise InvalidInputError(f"{path}: not a policy checkpoint")
    if header.get("version") != str(CHECKPOINT_VERSION) or header.get("architecture") != ARCHITECTURE:
        raise InvalidInputError(f"{path}: unsupported checkpoint {header}")
    if not body or not body[0].startswith("baseline "):
        raise InvalidInputError(f"{path}: missing baseline line")
    baseline = float(body[0].split()[1])
    values = np.array([float(v) for v in body[1:]])
    return PolicyParams.from_flat(values), baseline
