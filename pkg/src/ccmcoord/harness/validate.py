"""Oracle battery checking the CCM engine against systems with known causal structure."""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from ..ccm import EmbeddingParams, ccm_curve, ccm_score, cross_map, delay_embed, simplex_weights
from ..synth import LogisticPairParams, coupled_logistic, signal_series

PARAMS = EmbeddingParams()
N = 1000
DIRECTION_SEEDS = range(10)
NULL_SEEDS = range(20)
L_SMALL = 100


def _check(name: str, measured: float, threshold: float, op: str) -> dict:
    passed = {
        ">": measured > threshold,
        ">=": measured >= threshold,
        "<": measured < threshold,
    }[op]
    return {"name": name, "measured": float(measured), "comparison": op, "threshold": threshold, "passed": bool(passed)}


def directionality_stats(seeds=DIRECTION_SEEDS, n: int = N, n_draws: int = 32) -> dict:
    """Per-seed CCM on the default coupled logistic pair (X drives Y).

    ``causal`` estimates the driver X from the driven manifold of Y at the
    small and full library sizes; ``reverse`` estimates Y from X's manifold.
    """
    m = PARAMS.manifold_size(n)
    causal_small, causal_full, reverse_full = [], [], []
    for seed in seeds:
        x, y = coupled_logistic(LogisticPairParams(n=n), seed)
        rng = np.random.default_rng(seed)
        fwd = ccm_curve(y, x, PARAMS, [L_SMALL, m], n_draws, rng)
        rev = ccm_curve(x, y, PARAMS, [m], n_draws, rng)
        causal_small.append(fwd.skills[0])
        causal_full.append(fwd.skills[-1])
        reverse_full.append(rev.score)
    return {
        "library_full": m,
        "causal_small": np.array(causal_small),
        "causal_full": np.array(causal_full),
        "reverse_full": np.array(reverse_full),
    }


def noise_null_scores(seeds=NULL_SEEDS, n: int = N, n_draws: int = 32) -> np.ndarray:
    m = PARAMS.manifold_size(n)
    scores = []
    for seed in seeds:
        a = signal_series("gaussian_noise", n, 2 * seed)
        b = signal_series("gaussian_noise", n, 2 * seed + 1)
        scores.append(ccm_score(a, b, PARAMS, m, n_draws, np.random.default_rng(seed)).value)
    return np.array(scores)


def boundedness_violation(weight_fn=simplex_weights, seed: int = 0) -> float:
    """Largest distance of any cross-map estimate outside its neighbors' target range."""
    x, y = coupled_logistic(LogisticPairParams(n=400), seed)
    manifold = delay_embed(y, PARAMS)
    rng = np.random.default_rng(seed)
    lib = np.sort(rng.choice(len(manifold), size=150, replace=False))
    res = cross_map(manifold, x, lib, weight_fn=weight_fn)
    targets = x[manifold.time_index][res.neighbors]
    below = targets.min(axis=1) - res.estimates
    above = res.estimates - targets.max(axis=1)
    return float(max(0.0, below.max(), above.max()))


def validate_suite(output_dir=None, emit: bool = False, weight_fn=simplex_weights) -> dict:
    """Run every check and return (and optionally write) a pass/fail report.

    ``weight_fn`` replaces the simplex weights in the boundedness check so a
    faulty estimator can be planted.
    """
    checks = []
    d = directionality_stats()
    checks.append(_check("directionality_driven_to_driver_score", d["causal_full"].mean(), 0.8, ">"))
    gap = (d["causal_full"] - d["reverse_full"]).mean()
    checks.append(_check("directionality_gap", gap, 0.3, ">="))
    conv = (d["causal_full"] - d["causal_small"]).mean()
    checks.append(_check("convergence_delta", conv, 0.1, ">"))

    null = noise_null_scores()
    checks.append(_check("noise_null_mean_abs_score", np.abs(null).mean(), 0.1, "<"))

    x, y = coupled_logistic(LogisticPairParams(), 3)
    m = PARAMS.manifold_size(x.size)
    base = ccm_score(y, x, PARAMS, 400, 8, np.random.default_rng(7)).value
    moved = ccm_score(2.5 * y - 4.0, 0.3 * x + 11.0, PARAMS, 400, 8, np.random.default_rng(7)).value
    checks.append(_check("affine_invariance_abs_diff", abs(moved - base), 1e-9, "<"))

    sine = signal_series("sine", 500, 0, f=0.01)
    checks.append(
        _check("self_prediction_sine", ccm_score(sine, sine, PARAMS, PARAMS.manifold_size(500), 1, None).value, 0.99, ">=")
    )
    checks.append(_check("self_prediction_logistic", ccm_score(x, x, PARAMS, m, 1, None).value, 0.99, ">="))

    w = simplex_weights(np.sort(np.random.default_rng(0).uniform(0, 5, size=(200, 4)), axis=1))
    checks.append(_check("weight_normalization_max_error", np.abs(w.sum(axis=1) - 1).max(), 1e-12, "<"))
    checks.append(_check("estimator_boundedness_max_violation", boundedness_violation(weight_fn), 1e-12, "<"))

    report = {"passed": all(c["passed"] for c in checks), "checks": checks}
    if output_dir is not None:
        out = Path(output_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "validate_report.json").write_text(json.dumps(report, indent=2) + "\n")
        if emit:
            emit_oracle_data(out)
    return report


def emit_oracle_data(out: Path) -> list[Path]:
    """Write the oracle systems as headed CSV files for use with ``ccm``."""
    out = Path(out)
    written = []
    x, y = coupled_logistic(LogisticPairParams(), 0)
    written.append(_write_csv(out / "coupled_logistic.csv", {"x": x, "y": y}))
    a = signal_series("gaussian_noise", N, 0)
    b = signal_series("gaussian_noise", N, 1)
    written.append(_write_csv(out / "noise_pair.csv", {"a": a, "b": b}))
    s = signal_series("sine", 500, 0, f=0.01)
    written.append(_write_csv(out / "sine.csv", {"s1": s, "s2": s}))
    return written


def _write_csv(path: Path, cols: dict[str, np.ndarray]) -> Path:
    names = list(cols)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(names)
        for row in zip(*(cols[n] for n in names)):
            w.writerow([repr(float(v)) for v in row])
    return path
