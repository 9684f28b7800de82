"""Command-line entry point.

Usage:
    ccmcoord validate [--emit] [--out DIR]
    ccmcoord ccm FILE --cols a,b [--E 3 --tau 1 --theiler 2 --L 50,100 --n-draws 32]
    ccmcoord simulate CONFIG --seed S --dump FILE
    ccmcoord train CONFIG --seed S [--shaping.theta 0.4 ...]
    ccmcoord sweep CONFIG --thetas 0.0,0.6 --seeds 1..10
    ccmcoord defaults > config.json

Any ``--section.field value`` (or top-level ``--episodes 50``) flag overrides
the matching config field.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from .ccm import EmbeddingParams
from .errors import InvalidInputError
from .harness.config import (
    OUTPUT_ROOT_ENV,
    ExperimentConfig,
    apply_overrides,
    config_to_dict,
    load_config,
)

log = logging.getLogger("ccmcoord")


def parse_int_list(text: str) -> list[int]:
    """``"1..3,7"`` -> ``[1, 2, 3, 7]``."""
    out = []
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        if ".." in part:
            lo, hi = part.split("..", 1)
            out.extend(range(int(lo), int(hi) + 1))
        else:
            out.append(int(part))
    if not out:
        raise argparse.ArgumentTypeError(f"empty list: {text!r}")
    return out


def parse_float_list(text: str) -> list[float]:
    return [float(p) for p in text.split(",") if p.strip()]


def split_overrides(extra: list[str]) -> dict[str, str]:
    """Turn ``["--shaping.theta", "0.4", "--env.dt=0.05"]`` into a dotted-path dict."""
    overrides = {}
    i = 0
    while i < len(extra):
        flag = extra[i]
        if not flag.startswith("--"):
            raise InvalidInputError(f"unrecognized argument {flag!r}")
        key = flag[2:]
        if "=" in key:
            key, value = key.split("=", 1)
            i += 1
        else:
            if i + 1 >= len(extra):
                raise InvalidInputError(f"missing value for {flag}")
            value = extra[i + 1]
            i += 2
        overrides[key] = value
    return overrides


def _config(args, extra) -> ExperimentConfig:
    config = load_config(args.config)
    overrides = split_overrides(extra)
    return apply_overrides(config, overrides) if overrides else config


def _output_root() -> Path:
    return Path(os.environ.get(OUTPUT_ROOT_ENV, "."))


def cmd_validate(args, extra) -> int:
    from .harness.validate import validate_suite

    out = Path(args.out) if args.out else _output_root() / "validate"
    report = validate_suite(out, emit=args.emit)
    for c in report["checks"]:
        status = "PASS" if c["passed"] else "FAIL"
        print(f"{status}  {c['name']}: {c['measured']:.6g} {c['comparison']} {c['threshold']:g}")
    print(f"report written to {out / 'validate_report.json'}")
    return 0 if report["passed"] else 1


def cmd_ccm(args, extra) -> int:
    from .harness.report import ccm_report

    cols = [c.strip() for c in args.cols.split(",")]
    if len(cols) != 2:
        raise InvalidInputError("--cols needs exactly two column names, e.g. --cols a,b")
    params = EmbeddingParams(args.E, args.tau, args.theiler)
    out = Path(args.out) if args.out else Path(args.file).with_suffix(".ccm.json")
    report = ccm_report(args.file, (cols[0], cols[1]), params, args.L, args.n_draws, args.seed, out)
    for d in report["directions"]:
        print(
            f"manifold={d['manifold']} target={d['target']} ({d['influence']}): "
            f"score={d['score']:.4f} convergence_delta={d['convergence_delta']:.4f}"
            + (" [degenerate]" if d["degenerate"] else "")
        )
    print(f"report written to {out}")
    return 0


def cmd_simulate(args, extra) -> int:
    from .harness.simulate import simulate

    config = _config(args, extra)
    batches = simulate(config, args.seed, args.dump, args.episodes, args.checkpoints)
    contacts = [int(b.contacts.sum()) for b in batches]
    print(f"{len(batches)} episode(s), contacts per episode: {contacts}; dump written to {args.dump}")
    return 0


def cmd_train(args, extra) -> int:
    from .harness.training import run_training, window_summary

    config = _config(args, extra)
    art = run_training(config, args.seed, shaping_enabled=not args.no_shaping)
    first = window_summary(art.metrics, first=True)
    last = window_summary(art.metrics)
    print(f"run {art.config_digest} seed {args.seed}: {len(art.metrics)} episodes in {art.wall_clock_s:.1f}s")
    print(f"contacts/episode first window {first['contacts']:.3f} -> final window {last['contacts']:.3f}")
    print(f"predator CCM final window {last['predator_ccm']:.3f}")
    print(f"metrics: {art.metrics_path}")
    return 0


def cmd_sweep(args, extra) -> int:
    from .harness.sweep import sweep_threshold

    config = _config(args, extra)
    seeds = args.seeds if args.seeds else list(config.seeds)
    summary = sweep_threshold(config, args.thetas, seeds, workers=args.workers)
    failed = [r for r in summary.rows if r["status"] != "ok"]
    for r in summary.rows:
        if r["status"] == "ok":
            print(
                f"theta={r['theta']:g} seed={r['seed']}: contacts={r['contacts']:.3f} "
                f"predator_ccm={r['predator_ccm']:.3f}"
            )
        else:
            print(f"theta={r['theta']:g} seed={r['seed']}: {r['status']}")
    print(f"summary written to {summary.path}")
    return 1 if failed else 0


def cmd_defaults(args, extra) -> int:
    print(json.dumps(config_to_dict(ExperimentConfig()), indent=2, sort_keys=True))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ccmcoord", description=__doc__.split("\n")[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="run the CCM oracle battery")
    p.add_argument("--emit", action="store_true", help="also write the oracle series as CSV")
    p.add_argument("--out", help="output directory")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("ccm", help="CCM report for two CSV columns")
    p.add_argument("file")
    p.add_argument("--cols", required=True)
    p.add_argument("--E", type=int, default=3)
    p.add_argument("--tau", type=int, default=1)
    p.add_argument("--theiler", type=int, default=None)
    p.add_argument("--L", type=parse_int_list, default=None, help="library sizes, e.g. 50,100,400")
    p.add_argument("--n-draws", type=int, default=32)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")
    p.set_defaults(func=cmd_ccm)

    p = sub.add_parser("simulate", help="roll out episodes and dump trajectories")
    p.add_argument("config")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--dump", required=True)
    p.add_argument("--episodes", type=int, default=1)
    p.add_argument("--checkpoints", help="directory with agent<i>.ckpt files")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("train", help="train one seed")
    p.add_argument("config")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--no-shaping", action="store_true", help="disable the coordination bonus")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("sweep", help="sweep the coordination threshold")
    p.add_argument("config")
    p.add_argument("--thetas", type=parse_float_list, required=True)
    p.add_argument("--seeds", type=parse_int_list, default=None)
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("defaults", help="print the default config as JSON")
    p.set_defaults(func=cmd_defaults)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args, extra = parser.parse_known_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    if extra and args.command not in ("simulate", "train", "sweep"):
        parser.error(f"unrecognized arguments: {' '.join(extra)}")
    try:
        return args.func(args, extra)
    except (InvalidInputError, OSError, ArithmeticError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
