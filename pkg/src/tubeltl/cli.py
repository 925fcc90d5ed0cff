"""Command line: ``abstract``, ``simulate`` and ``verify``.

Exit codes: 0 success, 1 verification did not pass, 2 invalid input,
3 unrealizable formula, 4 runtime invariant violation.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
import time
from pathlib import Path
from typing import Optional

from .abstraction import build, load_cache, save_cache
from .config import ConfigError, load_config
from .ltl import Plan, Unrealizable, plan
from .report import ensure_dir, plot_abstraction, plot_intervals, plot_run
from .runtime import Guide, RunLog, RuntimeInvariantError, simulate
from .semantics import check_run

EXIT_OK = 0
EXIT_FAIL = 1
EXIT_INVALID = 2
EXIT_UNREALIZABLE = 3
EXIT_RUNTIME = 4

log = logging.getLogger("tubeltl")


def _err(msg: str) -> None:
    print(f"error: {msg}", file=sys.stderr)


def _write_pairs_csv(path, report) -> None:
    cols = ["i", "j", "status", "eps0", "horizon", "seed", "attempts", "D1", "D2", "margin"]
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(cols)
        for (i, j), d in sorted(report.items()):
            wr.writerow([i, j] + ["" if d.get(c) is None else d.get(c) for c in cols[2:]])


def cmd_abstract(args) -> int:
    cfg = load_config(args.config)
    key = cfg.abstraction_key()
    out = Path(args.out)
    cached = None if args.force else load_cache(out, key)
    t0 = time.perf_counter()
    if cached is not None:
        ts, lib, report = cached
        print(f"cache hit: {out}")
    else:
        ts, lib, report = build(cfg.model, cfg.workspace, cfg.init_region, cfg.shape, cfg.abstraction)
        out.parent.mkdir(parents=True, exist_ok=True)
        save_cache(out, key, ts, lib, report)
        print(f"abstraction built in {time.perf_counter() - t0:.1f} s")
    stem = out.with_suffix("")
    _write_pairs_csv(f"{stem}_pairs.csv", report)
    plot_abstraction(f"{stem}.svg", cfg.workspace, lib)
    n_self = sum(1 for a, b in ts.edges if a == b)
    print(f"{ts.n_states} states, {len(ts.edges)} transitions ({n_self} self-loops)")
    for (i, j), d in sorted(report.items()):
        extra = f" eps0={d['eps0']:.3f} L={d['horizon']}" if "eps0" in d else ""
        print(f"  ({i},{j}) {d['status']}{extra}")
    return EXIT_OK


def _load_abstraction(cfg, cache_path):
    cached = load_cache(cache_path, cfg.abstraction_key())
    if cached is None:
        raise ConfigError(str(cache_path), "cache missing or built from a different configuration")
    return cached


def cmd_simulate(args) -> int:
    cfg = load_config(args.config)
    ts, lib, _ = _load_abstraction(cfg, args.cache)
    f = cfg.formula(args.formula)
    try:
        p = plan(ts, f)
    except Unrealizable as exc:
        _err(f"formula {args.formula} is unrealizable on the abstraction: {exc}")
        return EXIT_UNREALIZABLE
    steps = args.steps if args.steps is not None else cfg.runtime.steps
    H = args.horizon if args.horizon is not None else cfg.runtime.H
    mode = args.disturbance or cfg.runtime.disturbance
    out = ensure_dir(args.out)
    guide = Guide(p, lib, cfg.workspace)
    code = EXIT_OK
    try:
        run = simulate(cfg.model, cfg.workspace, guide, cfg.x0, H, steps, args.seed, mode,
                       config_hash=cfg.config_hash())
    except RuntimeInvariantError as exc:
        _err(str(exc))
        run = exc.log
        code = EXIT_RUNTIME
    run.to_csv(out / "run.csv")
    summary = {
        "formula": args.formula,
        "plan": p.to_dict(),
        "seed": args.seed,
        "steps": steps,
        "H": H,
        "disturbance": mode,
        "communications": run.comm_count,
        "periodic": steps + 1,
        "config_hash": cfg.config_hash(),
        "status": "ok" if code == EXIT_OK else "runtime-invariant-violation",
    }
    (out / "run.json").write_text(json.dumps(summary, indent=1, sort_keys=True) + "\n")
    plot_run(out / "run.svg", cfg.workspace, run, guide, title=f"{args.formula}, seed {args.seed}")
    plot_intervals(out / "intervals.svg", run)
    print(f"plan: prefix {p.prefix} suffix {p.suffix}")
    print(f"communications = {run.comm_count}, periodic = {steps + 1} "
          f"({100.0 * run.comm_count / (steps + 1):.1f}%)")
    return code


def cmd_verify(args) -> int:
    cfg = load_config(args.config)
    f = cfg.formula(args.formula)
    try:
        run = RunLog.from_csv(args.run)
    except (OSError, ValueError) as exc:
        _err(f"{args.run}: {exc}")
        return EXIT_INVALID
    p: Optional[Plan] = None
    if args.cache:
        ts, _, _ = _load_abstraction(cfg, args.cache)
        try:
            p = plan(ts, f)
        except Unrealizable as exc:
            _err(str(exc))
            return EXIT_UNREALIZABLE
    else:
        side = Path(args.run).with_suffix(".json")
        if not side.exists():
            _err(f"no plan available: pass --cache or keep {side.name} next to the run")
            return EXIT_INVALID
        p = Plan.from_dict(json.loads(side.read_text())["plan"])
    v = check_run(f, p, cfg.workspace, run.states)
    print(f"{v.status.upper()}: {v.reason}")
    if v.trace is not None:
        print(f"trace: {v.trace}")
    if v.divergence is not None:
        print(f"first divergent letter: {v.divergence}")
    return EXIT_OK if v.passed else EXIT_FAIL


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="tubeltl", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    a = sub.add_parser("abstract", help="build and cache the transition system")
    a.add_argument("--config", required=True)
    a.add_argument("--out", required=True, help="cache file (JSON)")
    a.add_argument("--force", action="store_true", help="ignore an existing cache")
    a.set_defaults(func=cmd_abstract)

    s = sub.add_parser("simulate", help="plan a formula and run the closed loop")
    s.add_argument("--config", required=True)
    s.add_argument("--cache", required=True)
    s.add_argument("--formula", required=True)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--steps", type=int)
    s.add_argument("--horizon", type=int)
    s.add_argument("--disturbance", choices=["uniform", "adversarial"])
    s.add_argument("--out", required=True, help="output directory")
    s.set_defaults(func=cmd_simulate)

    v = sub.add_parser("verify", help="check a logged run against a formula")
    v.add_argument("--run", required=True)
    v.add_argument("--config", required=True)
    v.add_argument("--formula", required=True)
    v.add_argument("--cache", help="replan from this cache instead of the run's sidecar JSON")
    v.set_defaults(func=cmd_verify)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        _err(str(exc))
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
