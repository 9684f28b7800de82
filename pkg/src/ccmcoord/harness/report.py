"""CCM reports for two columns of a CSV file."""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path

import numpy as np

from ..ccm import EmbeddingParams, ccm_curve
from ..errors import InvalidInputError


def read_columns(path, names: list[str]) -> dict[str, np.ndarray]:
    """Read named numeric columns from a headed CSV, naming the first bad cell."""
    p = Path(path)
    if not p.is_file():
        raise InvalidInputError(f"input file not found: {p}")
    with p.open(newline="") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        for name in names:
            if name not in header:
                raise InvalidInputError(f"column {name!r} not found in {p} (columns: {', '.join(header)})")
        cols = {name: [] for name in names}
        for row_no, row in enumerate(reader, start=2):
            for name in names:
                cell = row[name]
                try:
                    value = float(cell)
                except (TypeError, ValueError):
                    raise InvalidInputError(f"non-numeric value {cell!r} at row {row_no}, column {name!r}") from None
                if not math.isfinite(value):
                    raise InvalidInputError(f"non-finite value {cell!r} at row {row_no}, column {name!r}")
                cols[name].append(value)
    return {k: np.array(v) for k, v in cols.items()}


def default_library_sizes(m: int, E: int, count: int = 10) -> list[int]:
    lo = min(max(E + 2, 10), m)
    return sorted({int(v) for v in np.linspace(lo, m, count)})


def ccm_report(
    input_path,
    columns: tuple[str, str],
    params: EmbeddingParams = EmbeddingParams(),
    L_values=None,
    n_draws: int = 32,
    seed: int = 0,
    output_path=None,
) -> dict:
    """Cross-map both directions between two columns and write a JSON report.

    In the entry with ``manifold=a, target=b`` a high convergent skill
    indicates that ``b`` influences ``a``.
    """
    a, b = columns
    data = read_columns(input_path, [a, b])
    n = data[a].size
    if n < params.min_length():
        raise InvalidInputError(f"series of length {n} is too short: need at least {params.min_length()}")
    m = params.manifold_size(n)
    Ls = list(L_values) if L_values else default_library_sizes(m, params.E)
    directions = []
    for src, tgt in ((a, b), (b, a)):
        res = ccm_curve(data[src], data[tgt], params, Ls, n_draws, np.random.default_rng(seed))
        directions.append({"manifold": src, "target": tgt, "influence": f"{tgt} -> {src}", **res.to_dict()})
    report = {
        "input": str(input_path),
        "columns": [a, b],
        "n": n,
        "n_draws": n_draws,
        "seed": seed,
        "params": {"E": params.E, "tau": params.tau, "theiler": params.theiler},
        "directions": directions,
    }
    if output_path is not None:
        Path(output_path).parent.mkdir(parents=True, exist_ok=True)
        Path(output_path).write_text(json.dumps(report, indent=2) + "\n")
    return report
