"""Command-line entry point: ``osfs <subcommand> [flags]``."""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

import yaml

from .core import TraceWindow
from .drift import MODES, N_INIT, compare_modes, drift_pipeline
from .errors import OsfsError
from .harness import (
    DEFAULT_TARGET,
    InformativeSpec,
    Scenario,
    emit_report,
    load_trace,
    render_report,
    run_scenario,
    synth_trace,
    write_trace,
)
from .predictor import N_TREES, offline_eval, online_eval
from .preprocess import preprocess
from .ranking import RankerConfig, rank
from .search import OsfsConfig, osfs_run

log = logging.getLogger("osfs")


def _load(args) -> TraceWindow:
    window = load_trace(args.trace, args.target)
    if args.clean:
        window, report = preprocess(window)
        log.info("preprocess: %s", report.to_dict())
    return window


def _osfs_config(args) -> OsfsConfig:
    return OsfsConfig(RankerConfig(kind=args.ranker), args.condition, args.policy)


def _write_text(text: str, out) -> None:
    if out is None:
        sys.stdout.write(text)
    else:
        Path(out).write_text(text)


def _write_json(obj, out) -> None:
    _write_text(json.dumps(obj, indent=2) + "\n", out)


def cmd_preprocess(args) -> int:
    window = load_trace(args.trace, args.target)
    cleaned, report = preprocess(window)
    if args.out is None:
        _write_json(report.to_dict(), None)
    else:
        write_trace(cleaned, args.out, args.target)
        log.info("wrote %d x %d trace to %s", cleaned.t, cleaned.n, args.out)
    return 0


def cmd_rank(args) -> int:
    window = _load(args)
    if args.t is not None:
        window = window.slice(args.start - 1).prefix(args.t)
    ranked = rank(window, RankerConfig(kind=args.ranker))
    rows = [(pos + 1, name, ranked.scores[name]) for pos, name in enumerate(ranked.order)]
    if args.format == "json":
        _write_json([{"rank": r, "feature": f, "score": s} for r, f, s in rows], args.out)
        return 0
    fh = open(args.out, "w", newline="") if args.out else sys.stdout
    try:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("rank", "feature", "score"))
        w.writerows((r, f, repr(s)) for r, f, s in rows)
    finally:
        if fh is not sys.stdout:
            fh.close()
    return 0


def cmd_select(args) -> int:
    window = _load(args)
    result = osfs_run(window.slice(args.start - 1), _osfs_config(args))
    _write_json(result.to_dict(), args.out)
    return 0


def _features_arg(args, window: TraceWindow) -> list:
    if args.features is None:
        return list(window.catalog.names)
    path = Path(args.features)
    if path.exists():
        data = json.loads(path.read_text())
        return list(data["features"] if isinstance(data, dict) else data)
    return [f.strip() for f in args.features.split(",") if f.strip()]


def cmd_evaluate(args) -> int:
    window = _load(args)
    features = _features_arg(args, window)
    if args.t_train is None:
        report = offline_eval(window, features, seed=args.seed, n_trees=args.n_trees)
    else:
        report = online_eval(window, features, args.t_train, seed=args.seed, n_trees=args.n_trees)
    _write_json({"k": len(features), **report.to_dict()}, args.out)
    return 0


def cmd_drift(args) -> int:
    window = _load(args)
    cfg = _osfs_config(args)
    if args.mode == "all":
        timelines = compare_modes(window, cfg, n_init=args.n_init, seed=args.seed,
                                  n_trees=args.n_trees)
    else:
        timelines = {args.mode: drift_pipeline(window, cfg, args.n_init, args.mode,
                                               seed=args.seed, n_trees=args.n_trees)}
    _write_json({m: tl.to_dict() for m, tl in timelines.items()}, args.out)
    return 0


def cmd_scenario(args) -> int:
    scenario = Scenario(
        trace=args.trace, target=args.target, ranker=args.ranker, condition=args.condition,
        policy=args.policy, start_points=args.start_points, seed=args.seed,
        dataset=args.dataset or "", n_trees=args.n_trees, clean=args.clean,
    )
    report = run_scenario(scenario)
    if args.out is None:
        sys.stdout.write(render_report([report], args.format))
    else:
        emit_report(report, args.out, args.format)
    return 0


def cmd_synth(args) -> int:
    spec = InformativeSpec(n_informative=args.n_informative, target_noise=args.target_noise)
    trace = synth_trace(args.n_noise, spec, args.t_len, args.drift_at, args.seed)
    out = args.out or "synthetic.csv"
    write_trace(trace.window, out, args.target)
    log.info("informative features: %s", ",".join(trace.informative))
    return 0


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--trace", help="delimited trace file")
    p.add_argument("--target", default=DEFAULT_TARGET, help="name of the target column")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help="output path (default: stdout)")
    p.add_argument("--format", choices=("csv", "json"), default="csv")


def _add_search(p: argparse.ArgumentParser) -> None:
    p.add_argument("--ranker", choices=("arr", "ls"), default="ls")
    p.add_argument("--condition", choices=("similarity", "stability"), default="similarity")
    p.add_argument("--policy", choices=("k-small", "t-small"), default="k-small")


def _add_clean(p: argparse.ArgumentParser) -> None:
    p.add_argument("--no-clean", dest="clean", action="store_false",
                   help="skip gap repair, scaling and the variance filter")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="osfs", description="Online feature selection toolkit")
    parser.add_argument("--config", help="YAML or JSON file whose keys mirror the flags")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("preprocess", help="clean a trace (gaps, scaling, flat features)")
    _add_common(p)
    p.set_defaults(func=cmd_preprocess)

    p = sub.add_parser("rank", help="rank all features on a trace window")
    _add_common(p)
    _add_search(p)
    _add_clean(p)
    p.add_argument("--start", type=int, default=1, help="first row (1-based)")
    p.add_argument("-t", type=int, help="window length (default: to the end)")
    p.set_defaults(func=cmd_rank)

    p = sub.add_parser("select", help="run the online search from a start row")
    _add_common(p)
    _add_search(p)
    _add_clean(p)
    p.add_argument("--start", type=int, default=1)
    p.set_defaults(func=cmd_select)

    p = sub.add_parser("evaluate", help="forest NMAE of a feature set")
    _add_common(p)
    _add_clean(p)
    p.add_argument("--features", help="comma list, or a JSON file written by 'select'")
    p.add_argument("--t-train", type=int, help="train on this prefix instead of a random split")
    p.add_argument("--n-trees", type=int, default=N_TREES)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("drift", help="replay a trace with drift detection")
    _add_common(p)
    _add_search(p)
    _add_clean(p)
    p.add_argument("--mode", choices=MODES + ("all",), default="all")
    p.add_argument("--n-init", type=int, default=N_INIT)
    p.add_argument("--n-trees", type=int, default=N_TREES)
    p.set_defaults(func=cmd_drift)

    p = sub.add_parser("scenario", help="ten-start evaluation report")
    _add_common(p)
    _add_search(p)
    _add_clean(p)
    p.add_argument("--start-points", type=int, nargs="+")
    p.add_argument("--dataset")
    p.add_argument("--n-trees", type=int, default=N_TREES)
    p.set_defaults(func=cmd_scenario)

    p = sub.add_parser("synth", help="write a synthetic trace with known informative features")
    _add_common(p)
    p.add_argument("--n-noise", type=int, default=500)
    p.add_argument("--n-informative", type=int, default=8)
    p.add_argument("--t-len", type=int, default=4000)
    p.add_argument("--drift-at", type=int)
    p.add_argument("--target-noise", type=float, default=0.0)
    p.set_defaults(func=cmd_synth)
    return parser


def _apply_config(parser: argparse.ArgumentParser, argv) -> argparse.Namespace:
    args = parser.parse_args(argv)
    if args.config:
        with open(args.config) as fh:
            conf = yaml.safe_load(fh) or {}
        if not isinstance(conf, dict):
            parser.error(f"{args.config}: expected a mapping of flag names to values")
        # Config values act as defaults; explicit flags still win.
        sub = parser._subparsers._group_actions[0].choices[args.command]
        sub.set_defaults(**{k.replace("-", "_"): v for k, v in conf.items()})
        args = parser.parse_args(argv)
    if args.command != "synth" and not args.trace:
        parser.error(f"{args.command} needs --trace (flag or config key)")
    return args


def main(argv=None) -> int:
    parser = build_parser()
    args = _apply_config(parser, argv)
    logging.basicConfig(
        level=logging.WARNING - 10 * min(args.verbose, 2),
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except (OsfsError, OSError) as exc:
        print(f"osfs {args.command}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
