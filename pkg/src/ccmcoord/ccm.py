"""Convergent cross mapping over scalar time series.

A series is delay-embedded into a shadow manifold, and the values of a second
series are estimated from simplex projections on that manifold. The Pearson
correlation between estimates and observations (the cross-map skill) measures
how much information about the target is encoded in the source dynamics, i.e.
the causal influence of the target on the source.

All functions are pure; randomness enters only through an explicit
``numpy.random.Generator``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Sequence

import numpy as np

from .errors import InvalidInputError

EPS = 1e-12

# Relative peak-to-peak below which a series counts as constant.
_DEGENERATE_RTOL = 1e-12


def as_series(values, name: str = "series") -> np.ndarray:
    """Validate ``values`` as a finite 1-D float series and return a copy."""
    arr = np.array(values, dtype=np.float64)
    if arr.ndim != 1:
        raise InvalidInputError(f"{name} must be one-dimensional, got shape {arr.shape}")
    if arr.size < 1:
        raise InvalidInputError(f"{name} must contain at least one value")
    if not np.all(np.isfinite(arr)):
        bad = int(np.flatnonzero(~np.isfinite(arr))[0])
        raise InvalidInputError(f"{name} has a non-finite value at index {bad}")
    return arr


def is_constant(values: np.ndarray) -> bool:
    values = np.asarray(values, dtype=np.float64)
    return bool(np.ptp(values) <= _DEGENERATE_RTOL * np.max(np.abs(values)))


@dataclass(frozen=True)
class EmbeddingParams:
    """Delay-embedding parameters.

    ``theiler`` defaults to ``(E - 1) * tau`` when left as ``None``.
    """

    E: int = 3
    tau: int = 1
    theiler: int | None = None

    def __post_init__(self):
        for name, lo in (("E", 1), ("tau", 1)):
            value = getattr(self, name)
            if isinstance(value, bool) or not isinstance(value, (int, np.integer)) or value < lo:
                raise InvalidInputError(f"{name} must be an integer >= {lo}, got {value!r}", field=name)
        if self.theiler is None:
            object.__setattr__(self, "theiler", (self.E - 1) * self.tau)
        elif (
            isinstance(self.theiler, bool)
            or not isinstance(self.theiler, (int, np.integer))
            or self.theiler < 0
        ):
            raise InvalidInputError(
                f"theiler must be a non-negative integer, got {self.theiler!r}", field="theiler"
            )

    @property
    def span(self) -> int:
        return (self.E - 1) * self.tau

    def manifold_size(self, n: int) -> int:
        return n - self.span

    def min_length(self) -> int:
        """Shortest series that leaves E + 2 embedded points."""
        return self.span + self.E + 2


@dataclass(frozen=True)
class ShadowManifold:
    points: np.ndarray
    time_index: np.ndarray
    params: EmbeddingParams
    series_length: int

    def __len__(self) -> int:
        return self.points.shape[0]


def delay_embed(series, params: EmbeddingParams) -> ShadowManifold:
    """Embed ``series`` as ``(x(t), x(t - tau), ..., x(t - (E-1) tau))``.

    Raises:
        InvalidInputError: if the series is non-finite or shorter than
            ``params.min_length()``.
    """
    x = as_series(series)
    n = x.size
    if n < params.min_length():
        raise InvalidInputError(
            f"series of length {n} is too short for E={params.E}, tau={params.tau}: "
            f"need at least {params.min_length()} values"
        )
    span = params.span
    times = np.arange(span, n)
    points = np.column_stack([x[times - j * params.tau] for j in range(params.E)])
    return ShadowManifold(points=points, time_index=times, params=params, series_length=n)


def _distance_matrix(points: np.ndarray, cols: np.ndarray | None = None) -> np.ndarray:
    other = points if cols is None else points[cols]
    sq = np.zeros((points.shape[0], other.shape[0]))
    for j in range(points.shape[1]):
        diff = points[:, j, None] - other[None, :, j]
        sq += diff * diff
    return np.sqrt(sq)


def _theiler_mask(time_index: np.ndarray, theiler: int) -> np.ndarray:
    """Boolean matrix, True where a pair is temporally excluded."""
    return np.abs(time_index[:, None] - time_index[None, :]) <= theiler


def neighbor_query(manifold: ShadowManifold, query_index: int, k: int, candidates=None):
    """Return the ``k`` nearest admissible neighbors of a manifold point.

    Points within the Theiler window of the query (the query included) are
    never returned. Ties in distance go to the lower point index.

    Returns:
        list of ``(point_index, distance)`` sorted by ascending distance.
    """
    m = len(manifold)
    if not 0 <= query_index < m:
        raise InvalidInputError(f"query_index {query_index} outside [0, {m})")
    if k < 1:
        raise InvalidInputError(f"k must be >= 1, got {k}")
    idx = np.arange(m) if candidates is None else np.unique(np.asarray(candidates, dtype=int))
    t = manifold.time_index
    idx = idx[np.abs(t[idx] - t[query_index]) > manifold.params.theiler]
    if idx.size < k:
        raise InvalidInputError(
            f"only {idx.size} admissible neighbors for query {query_index}, need {k}"
        )
    diff = manifold.points[idx] - manifold.points[query_index]
    d = np.sqrt(np.sum(diff * diff, axis=1))
    order = np.lexsort((idx, d))[:k]
    return [(int(idx[o]), float(d[o])) for o in order]


def simplex_weights(distances) -> np.ndarray:
    """Exponential simplex weights ``exp(-(d_i + eps) / (d_1 + eps))``, normalized.

    Accepts a sorted 1-D array or a 2-D array of row-wise sorted distances.
    """
    d = np.asarray(distances, dtype=np.float64)
    if d.size == 0 or d.shape[-1] == 0:
        raise InvalidInputError("distances must be non-empty")
    if np.any(d < 0) or not np.all(np.isfinite(d)):
        raise InvalidInputError("distances must be finite and non-negative")
    if np.any(np.diff(d, axis=-1) < 0):
        raise InvalidInputError("distances must be sorted ascending")
    u = np.exp(-(d + EPS) / (d[..., :1] + EPS))
    return u / u.sum(axis=-1, keepdims=True)


class Correlation(NamedTuple):
    r: float
    degenerate: bool


def pearson(a, b) -> Correlation:
    """Pearson correlation; zero-variance input gives ``Correlation(0.0, True)``."""
    a = as_series(a, "a")
    b = as_series(b, "b")
    if a.size != b.size:
        raise InvalidInputError(f"length mismatch: {a.size} vs {b.size}")
    if a.size < 2:
        raise InvalidInputError("pearson needs at least 2 values")
    if is_constant(a) or is_constant(b):
        return Correlation(0.0, True)
    da = a - a.mean()
    db = b - b.mean()
    r = float(np.dot(da, db) / np.sqrt(np.dot(da, da) * np.dot(db, db)))
    return Correlation(min(1.0, max(-1.0, r)), False)


@dataclass(frozen=True)
class CrossMapResult:
    """Estimates of the target at the times of predictable query points.

    ``neighbors`` holds the library point indices used for each estimate.
    """

    times: np.ndarray
    estimates: np.ndarray
    observed: np.ndarray
    neighbors: np.ndarray
    skill: float
    degenerate: bool


WeightFn = Callable[[np.ndarray], np.ndarray]


def _knn_rows(sub: np.ndarray, k: int):
    """k smallest entries per row of ``sub`` ordered by (distance, column).

    Rows with fewer than ``k`` finite entries are reported as unusable.
    """
    finite = np.isfinite(sub)
    usable = finite.sum(axis=1) >= k
    sub = sub[usable]
    if sub.shape[0] == 0:
        return usable, np.empty((0, k), dtype=int), np.empty((0, k))
    if k < sub.shape[1]:
        part = np.argpartition(sub, k - 1, axis=1)[:, :k]
    else:
        part = np.broadcast_to(np.arange(sub.shape[1]), sub.shape).copy()
    rows = np.arange(sub.shape[0])[:, None]
    kth = sub[rows, part].max(axis=1)
    # ties straddling the k-th distance need an exact index-ordered selection
    ambiguous = np.flatnonzero((sub <= kth[:, None]).sum(axis=1) > k)
    for r in ambiguous:
        part[r] = np.argsort(sub[r], kind="stable")[:k]
    dist = sub[rows, part]
    order = np.lexsort((part, dist), axis=1)
    part = np.take_along_axis(part, order, axis=1)
    dist = np.take_along_axis(dist, order, axis=1)
    return usable, part, dist


class _CrossMapper:
    """Cached distances for one source manifold, reused across libraries."""

    def __init__(self, manifold: ShadowManifold):
        self.manifold = manifold
        dist = _distance_matrix(manifold.points)
        dist[_theiler_mask(manifold.time_index, manifold.params.theiler)] = np.inf
        self.dist = dist

    def run(self, y_at_points: np.ndarray, library: np.ndarray, weight_fn: WeightFn = simplex_weights):
        k = self.manifold.params.E + 1
        usable, cols, dist = _knn_rows(self.dist[:, library], k)
        if cols.shape[0] == 0:
            raise InvalidInputError("no query point has enough admissible library neighbors")
        neighbors = library[cols]
        w = weight_fn(dist)
        estimates = np.sum(w * y_at_points[neighbors], axis=1)
        observed = y_at_points[usable]
        corr = pearson(estimates, observed) if estimates.size >= 2 else Correlation(0.0, True)
        return CrossMapResult(
            times=self.manifold.time_index[usable],
            estimates=estimates,
            observed=observed,
            neighbors=neighbors,
            skill=corr.r,
            degenerate=corr.degenerate,
        )


def _check_library(library, m: int, E: int) -> np.ndarray:
    lib = np.unique(np.asarray(library, dtype=int))
    if lib.size and (lib[0] < 0 or lib[-1] >= m):
        raise InvalidInputError(f"library indices must lie in [0, {m})")
    if lib.size < E + 2:
        raise InvalidInputError(f"library of {lib.size} points is smaller than E + 2 = {E + 2}")
    return lib


def cross_map(
    source: ShadowManifold,
    target,
    library_indices,
    weight_fn: WeightFn = simplex_weights,
) -> CrossMapResult:
    """Estimate ``target`` from the neighbors of each point on ``source``.

    Every manifold point is a query; its E + 1 nearest admissible neighbors
    are drawn from ``library_indices``. Queries without enough admissible
    neighbors are skipped.
    """
    y = as_series(target, "target")
    if y.size != source.series_length:
        raise InvalidInputError(
            f"target length {y.size} differs from source length {source.series_length}"
        )
    lib = _check_library(library_indices, len(source), source.params.E)
    return _CrossMapper(source).run(y[source.time_index], lib, weight_fn)


@dataclass(frozen=True)
class CcmResult:
    library_sizes: list[int]
    skills: list[float]
    score: float
    convergence_delta: float
    degenerate: bool
    params: EmbeddingParams = field(default_factory=EmbeddingParams)

    def to_dict(self) -> dict:
        return {
            "library_sizes": list(self.library_sizes),
            "skills": list(self.skills),
            "score": self.score,
            "convergence_delta": self.convergence_delta,
            "degenerate": self.degenerate,
            "params": {"E": self.params.E, "tau": self.params.tau, "theiler": self.params.theiler},
        }


def _check_pair(x, y) -> tuple[np.ndarray, np.ndarray]:
    x = as_series(x, "x")
    y = as_series(y, "y")
    if x.size != y.size:
        raise InvalidInputError(f"x and y differ in length: {x.size} vs {y.size}")
    return x, y


def _curve(mapper: _CrossMapper, x, y, L_values, n_draws, rng, weight_fn=simplex_weights) -> CcmResult:
    params = mapper.manifold.params
    m = len(mapper.manifold)
    Ls = [int(L) for L in L_values]
    if not Ls:
        raise InvalidInputError("L_values must be non-empty")
    if any(b <= a for a, b in zip(Ls, Ls[1:])):
        raise InvalidInputError(f"L_values must be strictly increasing, got {Ls}")
    if Ls[-1] > m:
        raise InvalidInputError(f"library size {Ls[-1]} exceeds manifold size {m}")
    if Ls[0] < params.E + 2:
        raise InvalidInputError(f"library size {Ls[0]} is smaller than E + 2 = {params.E + 2}")
    if n_draws < 1:
        raise InvalidInputError(f"n_draws must be >= 1, got {n_draws}")

    if is_constant(x) or is_constant(y):
        skills = [0.0] * len(Ls)
        return CcmResult(Ls, skills, 0.0, 0.0, True, params)

    y_pts = y[mapper.manifold.time_index]
    skills = []
    for L in Ls:
        if L == m:
            # every draw is the full manifold
            skills.append(mapper.run(y_pts, np.arange(m), weight_fn).skill)
            continue
        draws = [
            mapper.run(y_pts, np.sort(rng.choice(m, size=L, replace=False)), weight_fn).skill
            for _ in range(n_draws)
        ]
        skills.append(float(np.mean(draws)))
    return CcmResult(Ls, skills, skills[-1], skills[-1] - skills[0], False, params)


def ccm_curve(
    x,
    y,
    params: EmbeddingParams,
    L_values: Sequence[int],
    n_draws: int,
    rng: np.random.Generator,
) -> CcmResult:
    """Cross-map skill of ``y`` estimated from the manifold of ``x``, per library size.

    For each L, ``n_draws`` libraries of L distinct manifold points are drawn
    and their skills averaged. A high, convergent skill indicates that ``y``
    influences ``x``.
    """
    x, y = _check_pair(x, y)
    mapper = _CrossMapper(delay_embed(x, params))
    return _curve(mapper, x, y, L_values, n_draws, rng)


class Score(NamedTuple):
    value: float
    degenerate: bool

    def __float__(self) -> float:
        return self.value


def ccm_score(x, y, params: EmbeddingParams, L: int, n_draws: int, rng) -> Score:
    res = ccm_curve(x, y, params, [L], n_draws, rng)
    return Score(res.score, res.degenerate)


@dataclass(frozen=True)
class CoordinationSummary:
    """Directional CCM scores between agents.

    ``pair_scores[i, j]`` is the skill of estimating agent j's actions from
    agent i's manifold, i.e. the influence of j on i. The diagonal is NaN
    and excluded from every mean.
    """

    agent_count: int
    pair_scores: np.ndarray
    per_agent_mean: np.ndarray
    overall_mean: float
    degenerate: np.ndarray

    def to_dict(self) -> dict:
        scores = [[None if i == j else float(v) for j, v in enumerate(row)] for i, row in enumerate(self.pair_scores)]
        return {
            "agent_count": self.agent_count,
            "pair_scores": scores,
            "per_agent_mean": [float(v) for v in self.per_agent_mean],
            "overall_mean": float(self.overall_mean),
        }


def summarize_pairs(pair_scores: np.ndarray) -> tuple[np.ndarray, float]:
    n = pair_scores.shape[0]
    off = ~np.eye(n, dtype=bool)
    per_agent = np.array(
        [np.mean(np.concatenate([pair_scores[i, off[i]], pair_scores[off[:, i], i]])) for i in range(n)]
    )
    return per_agent, float(np.mean(pair_scores[off]))


def pairwise_coordination(
    action_series: Sequence,
    params: EmbeddingParams,
    L: int,
    n_draws: int,
    rng: np.random.Generator,
) -> CoordinationSummary:
    series = [as_series(s, f"agent {i} series") for i, s in enumerate(action_series)]
    if len(series) < 2:
        raise InvalidInputError("pairwise coordination needs at least 2 agents")
    lengths = {s.size for s in series}
    if len(lengths) != 1:
        raise InvalidInputError(f"agent series differ in length: {sorted(lengths)}")
    n = len(series)
    scores = np.full((n, n), np.nan)
    flags = np.zeros((n, n), dtype=bool)
    for i in range(n):
        mapper = _CrossMapper(delay_embed(series[i], params))
        for j in range(n):
            if i == j:
                continue
            res = _curve(mapper, series[i], series[j], [L], n_draws, rng)
            scores[i, j] = res.score
            flags[i, j] = res.degenerate
    per_agent, overall = summarize_pairs(scores)
    return CoordinationSummary(n, scores, per_agent, overall, flags)
