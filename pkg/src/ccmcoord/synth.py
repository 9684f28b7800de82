"""Synthetic series with known causal structure, used to validate CCM."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import GenerationError, InvalidInputError

SIGNAL_KINDS = ("gaussian_noise", "sine", "random_walk")


@dataclass(frozen=True)
class LogisticPairParams:
    """Two coupled logistic maps.

    ``beta_xy`` is the coupling of Y onto X and ``beta_yx`` of X onto Y, so
    ``beta_yx > 0`` with ``beta_xy = 0`` means X drives Y.
    """

    r_x: float = 3.8
    r_y: float = 3.8
    beta_xy: float = 0.0
    beta_yx: float = 0.32
    x0: float = 0.4
    y0: float = 0.2
    n: int = 1000
    burn_in: int = 300

    def __post_init__(self):
        for name in ("r_x", "r_y"):
            v = getattr(self, name)
            if not 0 < v <= 4:
                raise InvalidInputError(f"{name} must lie in (0, 4], got {v}", field=name)
        for name in ("beta_xy", "beta_yx"):
            if getattr(self, name) < 0:
                raise InvalidInputError(f"{name} must be >= 0", field=name)
        for name in ("x0", "y0"):
            v = getattr(self, name)
            if not 0 < v < 1:
                raise InvalidInputError(f"{name} must lie in (0, 1), got {v}", field=name)
        if self.n < 1:
            raise InvalidInputError("n must be >= 1", field="n")
        if self.burn_in < 0:
            raise InvalidInputError("burn_in must be >= 0", field="burn_in")


def coupled_logistic(params: LogisticPairParams, seed: int) -> tuple[np.ndarray, np.ndarray]:
    """Iterate the coupled pair and return ``n`` post-burn-in samples of each.

    The seed shifts both initial values by the same uniform offset in
    [-1e-3, 1e-3], so equal starting values and parameters stay identical.
    """
    rng = np.random.default_rng(seed)
    delta = rng.uniform(-1e-3, 1e-3)
    x, y = params.x0 + delta, params.y0 + delta
    total = params.burn_in + params.n
    xs = np.empty(total)
    ys = np.empty(total)
    for t in range(total):
        xs[t], ys[t] = x, y
        x, y = (
            x * (params.r_x - params.r_x * x - params.beta_xy * y),
            y * (params.r_y - params.r_y * y - params.beta_yx * x),
        )
        if not (0.0 <= x <= 1.0 and 0.0 <= y <= 1.0):
            raise GenerationError(f"trajectory left [0, 1] at step {t + 1}: x={x}, y={y}")
    return xs[params.burn_in:], ys[params.burn_in:]


def signal_series(kind: str, n: int, seed: int, **kind_params) -> np.ndarray:
    """Reference signals: ``gaussian_noise``, ``sine`` (``f`` cycles/step) or ``random_walk``."""
    if n < 1:
        raise InvalidInputError(f"n must be >= 1, got {n}")
    rng = np.random.default_rng(seed)
    if kind == "gaussian_noise":
        return rng.standard_normal(n)
    if kind == "sine":
        f = float(kind_params.get("f", 0.01))
        return np.sin(2 * np.pi * f * np.arange(n))
    if kind == "random_walk":
        return np.cumsum(rng.standard_normal(n))
    raise InvalidInputError(f"unknown signal kind {kind!r}; expected one of {SIGNAL_KINDS}")
