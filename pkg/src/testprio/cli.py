"""Command-line interface: ``stats``, ``synth``, ``replay`` and ``grid``.

Exit codes are a stable contract: 0 success, 2 usage/config/parse errors,
3 dataset-shape errors (too little history to replay), 1 internal failures.
All commands honor ``--seed``; when omitted, a fixed documented constant is
used so default runs are reproducible.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import __version__
from .bench import GridSpec, default_grid_spec, emit_report, run_grid, write_canonical
from .config import load_config
from .domain import TestHistory, average_suite_duration
from .errors import (
    ConfigError,
    HistoryTooShort,
    IngestError,
    NoPriorHistory,
    TestPrioError,
    ValidationError,
)
from .features import FeatureConfig
from .ingest import (
    ColumnMapping,
    SyntheticSpec,
    dataset_stats,
    generate_synthetic,
    parse_external,
    parse_canonical,
    preset_mapping_path,
)
from .rankers import RankerKind, params_from_config
from .replay import DEFAULT_SEED, ReplayConfig, walk_forward

EXIT_OK = 0
EXIT_INTERNAL = 1
EXIT_USAGE = 2
EXIT_DATASET = 3

_USAGE_ERRORS = (IngestError, ConfigError, ValidationError, ValueError,
                 FileNotFoundError, IsADirectoryError, PermissionError)
_DATASET_ERRORS = (HistoryTooShort, NoPriorHistory)


def _load_history(path: str, mapping_arg: str | None) -> TestHistory:
    source = Path(path)
    if not source.exists():
        raise FileNotFoundError(f"input file not found: {path}")
    with source.open("rb") as fh:
        if mapping_arg is None:
            return parse_canonical(fh)
        mapping_path = Path(mapping_arg)
        if not mapping_path.exists():
            mapping_path = preset_mapping_path(mapping_arg)
        return parse_external(fh, ColumnMapping.from_file(mapping_path))


def _cmd_stats(args: argparse.Namespace) -> int:
    stats = dataset_stats(_load_history(args.input, args.mapping))
    if args.json:
        print(json.dumps(stats.as_dict(), sort_keys=True))
    else:
        print(f"tests:            {stats.n_tests}")
        print(f"executions:       {stats.n_executions}")
        print(f"cycles:           {stats.n_cycles}")
        print(f"failed fraction:  {stats.failed_execution_fraction:.6f}")
    return EXIT_OK


def _cmd_synth(args: argparse.Namespace) -> int:
    spec = SyntheticSpec.from_config(load_config(args.spec))
    history = generate_synthetic(spec, args.seed)
    write_canonical(history, args.out)
    if args.json:
        print(json.dumps(dataset_stats(history).as_dict(), sort_keys=True))
    else:
        print(f"wrote {history.n_executions} executions over {history.n_cycles} "
              f"cycles to {args.out}")
    return EXIT_OK


def _ranker_kind(name: str) -> RankerKind:
    try:
        return RankerKind(name)
    except ValueError:
        valid = ", ".join(k.value for k in RankerKind)
        raise ConfigError(f"unknown ranker {name!r}; valid kinds: {valid}") from None


def _cmd_replay(args: argparse.Namespace) -> int:
    history = _load_history(args.input, args.mapping)
    kind = _ranker_kind(args.ranker)
    budget = args.budget_frac * average_suite_duration(history)
    cfg = ReplayConfig(
        ranker=kind,
        budget_s=budget,
        history_fraction=args.history_frac,
        eval_fraction=args.eval_frac,
        base_seed=args.seed,
    )
    outcomes = walk_forward(history, cfg)

    from .metrics import aggregate  # local import keeps CLI deps minimal

    summary = aggregate(outcomes)
    doc = {
        "ranker": kind.value,
        "history_fraction": args.history_frac,
        "budget_fraction": args.budget_frac,
        "budget_s": budget,
        "seed": args.seed,
        "cycles_evaluated": summary.cycles,
        "mean_apfd": summary.mean_apfd,
        "std_apfd": summary.std_apfd,
        "apfd_defined": summary.apfd_defined,
        "mean_napfd": summary.mean_napfd,
        "mean_tdff_pct": summary.mean_tdff_pct,
        "tdff_defined": summary.tdff_defined,
        "mean_tdlf_pct": summary.mean_tdlf_pct,
        "tdlf_defined": summary.tdlf_defined,
        "mean_train_s": summary.mean_train_s,
        "mean_rank_s": summary.mean_rank_s,
        "degenerate_cells": summary.degenerate_count,
    }

    if args.out:
        from .bench import _write_atomic

        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        _write_atomic(out / "summary.json",
                      (json.dumps(doc, sort_keys=True, indent=2) + "\n").encode())
        rows = ["cycle_id,faults_present,faults_detected,executed,elapsed_s,"
                "apfd,napfd,tdff_pct,tdlf_pct,train_s,rank_s,degenerate"]
        for o in outcomes:
            met = o.metrics

            def fmt(v):
                return "" if v is None else repr(float(v))

            rows.append(",".join([
                str(o.cycle_id), str(o.faults_present), str(o.faults_detected),
                str(o.executed), repr(o.elapsed_s), fmt(met.apfd), fmt(met.napfd),
                fmt(met.tdff_pct), fmt(met.tdlf_pct), repr(o.train_seconds),
                repr(o.rank_seconds), str(int(o.degenerate)),
            ]))
        _write_atomic(out / "cycles.csv", ("\n".join(rows) + "\n").encode())

    if args.json:
        print(json.dumps(doc, sort_keys=True))
    else:
        mean = "undefined" if doc["mean_apfd"] is None else f"{doc['mean_apfd']:.4f}"
        print(f"ranker {kind.value}: {summary.cycles} cycles, mean APFD {mean} "
              f"({summary.apfd_defined} defined)")
    return EXIT_OK


def _grid_spec_from_args(args: argparse.Namespace) -> GridSpec:
    if not args.config:
        return default_grid_spec(base_seed=args.seed)
    cfg = load_config(args.config)
    names = [t.strip() for t in cfg.get("rankers", "").split(",") if t.strip()]
    kinds = [_ranker_kind(n) for n in names] if names else list(RankerKind)
    rankers = tuple((k, params_from_config(k, cfg)) for k in kinds)

    def fractions(key: str) -> tuple[float, ...]:
        if key not in cfg:
            return (0.2, 0.4, 0.6, 0.8, 1.0)
        return tuple(float(t) for t in cfg[key].split(",") if t.strip())

    seed = int(cfg["seed"]) if "seed" in cfg and args.seed == DEFAULT_SEED else args.seed
    features = FeatureConfig.from_config(
        {k.split(".", 1)[1]: v for k, v in cfg.items() if k.startswith("features.")}
    )
    return GridSpec(
        rankers=rankers,
        history_fractions=fractions("history_fractions"),
        budget_fractions=fractions("budget_fractions"),
        eval_fraction=float(cfg.get("eval_fraction", 0.2)),
        base_seed=seed,
        features=features,
    )


def _cmd_grid(args: argparse.Namespace) -> int:
    history = _load_history(args.input, args.mapping)
    spec = _grid_spec_from_args(args)
    result = run_grid(history, spec, workers=args.workers)
    paths = emit_report(result, args.out_dir)
    for name in sorted(paths):
        print(f"wrote {paths[name]}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="testprio",
        description="History-based test case prioritization replay and benchmark tool",
    )
    parser.add_argument("--version", action="version", version=f"testprio {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p_stats = sub.add_parser("stats", help="dataset statistics of a history file")
    p_stats.add_argument("input")
    p_stats.add_argument("--mapping", help="column mapping file, or preset name (abb, google)")
    p_stats.add_argument("--json", action="store_true")
    p_stats.add_argument("--seed", type=int, default=DEFAULT_SEED,
                         help="accepted for interface uniformity; parsing is deterministic")
    p_stats.set_defaults(func=_cmd_stats)

    p_synth = sub.add_parser("synth", help="generate a synthetic history file")
    p_synth.add_argument("spec", help="synthetic spec in key-value config format")
    p_synth.add_argument("--out", required=True)
    p_synth.add_argument("--seed", type=int, default=DEFAULT_SEED)
    p_synth.add_argument("--json", action="store_true",
                         help="print the generated history's stats as JSON")
    p_synth.set_defaults(func=_cmd_synth)

    p_replay = sub.add_parser("replay", help="walk-forward replay of one configuration")
    p_replay.add_argument("input")
    p_replay.add_argument("--ranker", required=True,
                          help="one of: " + ", ".join(k.value for k in RankerKind))
    p_replay.add_argument("--history-frac", type=float, default=0.6)
    p_replay.add_argument("--budget-frac", type=float, default=1.0)
    p_replay.add_argument("--eval-frac", type=float, default=0.2)
    p_replay.add_argument("--seed", type=int, default=DEFAULT_SEED)
    p_replay.add_argument("--mapping")
    p_replay.add_argument("--out", help="directory for cycles.csv and summary.json")
    p_replay.add_argument("--json", action="store_true")
    p_replay.set_defaults(func=_cmd_replay)

    p_grid = sub.add_parser("grid", help="full ranker x history x budget benchmark grid")
    p_grid.add_argument("input")
    p_grid.add_argument("--config", help="grid spec in key-value config format")
    p_grid.add_argument("--workers", type=int, default=1)
    p_grid.add_argument("--out-dir", default="grid-report")
    p_grid.add_argument("--seed", type=int, default=DEFAULT_SEED)
    p_grid.add_argument("--mapping")
    p_grid.set_defaults(func=_cmd_grid)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except _DATASET_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATASET
    except _USAGE_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except TestPrioError as exc:
        print(f"internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
