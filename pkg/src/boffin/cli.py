"""Command-line interface: tuning strategies, the strategy benchmark, and
corpus utilities.

Every run artifact is plain JSONL/CSV/JSON so downstream pipelines (and the
plotting one-liner in the README) can consume it without this package.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .benchmark import STRATEGIES, BenchmarkConfig, run_benchmark
from .corpus import (
    ManifestError,
    MixPlan,
    mix,
    read_manifest,
    split_holdout,
    validate_manifest,
    write_manifest,
)
from .objectives import (
    DEFAULT_TIMEOUT_S,
    SYNTHETIC_NAMES,
    ExternalObjective,
    Objective,
    ObjectiveFailure,
    SurrogateFamilyParams,
    make_speaker_surrogate,
    synthetic_objective,
)
from .space import SearchSpace, boffin_preset
from .tuner import (
    DEFAULT_N_INIT,
    History,
    TunerConfig,
    run_baseline,
    run_bo,
    run_random_search,
)

PRESET_NAME = "boffin-preset"


def _resolve_space(source: str | None) -> SearchSpace | None:
    """Space from its CLI source: None, the preset name, or a JSON path."""
    if source is None:
        return None
    if source == PRESET_NAME:
        return boffin_preset()
    try:
        return SearchSpace.from_json(Path(source).read_text())
    except (json.JSONDecodeError, KeyError, TypeError) as exc:
        raise ValueError(f"could not parse space file {source}: {exc}") from exc


def _load_family(path: str | None) -> SurrogateFamilyParams | None:
    if path is None:
        return None
    try:
        return SurrogateFamilyParams.from_dict(json.loads(Path(path).read_text()))
    except (json.JSONDecodeError, KeyError, TypeError) as exc:
        raise ValueError(f"could not parse family file {path}: {exc}") from exc


def _load_config_file(path: str) -> dict:
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ValueError(f"could not parse configuration file {path}: {exc}") from exc
    if not isinstance(doc, dict):
        raise ValueError(f"configuration file {path} must hold a JSON object")
    return doc


def _resolve_objective(args, out_dir: Path) -> tuple[Objective, SearchSpace]:
    """Build the objective named by --objective and the space it runs on.

    Synthetic names carry their own canonical space; surrogate:SEED and
    external:COMMAND run on --space (default: the preset).
    """
    source = args.objective
    if source in SYNTHETIC_NAMES:
        if args.space is not None:
            raise ValueError(
                f"synthetic objective {source!r} defines its own space; drop --space"
            )
        objective = synthetic_objective(source)
        return objective, objective.space
    space = _resolve_space(args.space) or boffin_preset()
    if source.startswith("surrogate:"):
        speaker_seed = int(source.split(":", 1)[1])
        family = _load_family(args.family_config)
        return make_speaker_surrogate(space, speaker_seed, family), space
    if source.startswith("external:"):
        command = source.split(":", 1)[1]
        if not command:
            raise ValueError("external objective needs a command: external:COMMAND")
        timeout = args.timeout_s if args.timeout_s is not None else DEFAULT_TIMEOUT_S
        objective = ExternalObjective(
            space, command, workdir=out_dir / "external", timeout_s=timeout
        )
        return objective, space
    raise ValueError(
        f"unknown objective {source!r}: expected one of {SYNTHETIC_NAMES}, "
        "surrogate:SEED, or external:COMMAND"
    )


def _write_run_artifacts(out_dir: Path, history: History, summary: dict) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "trials.jsonl").write_text(history.to_jsonl())
    (out_dir / "incumbent.csv").write_text(history.incumbent_csv())
    (out_dir / "summary.json").write_text(json.dumps(summary, indent=2) + "\n")


def _cmd_tune(args, strategy: str | None = None) -> int:
    strategy = strategy or args.strategy
    out_dir = Path(args.out)
    objective, space = _resolve_objective(args, out_dir)
    if strategy == "baseline":
        if args.baseline_config is None:
            raise ValueError("--strategy baseline requires --baseline-config")
        config = _load_config_file(args.baseline_config)
        history = run_baseline(objective, config, seed=args.seed)
    else:
        tuner_config = TunerConfig(space, args.budget, n_init=args.n_init, seed=args.seed)
        runner = run_bo if strategy == "bo" else run_random_search
        history = runner(objective, tuner_config)
    best = history.best_trial()
    summary = {
        "strategy": strategy,
        "objective": args.objective,
        "seed": args.seed,
        "n_trials": len(history),
        "best_index": best.index,
        "best_score": best.score,
        "best_config": best.config,
    }
    _write_run_artifacts(out_dir, history, summary)
    print(
        f"{strategy}: {len(history)} trials, best {best.score!r} "
        f"at trial {best.index}; artifacts in {out_dir}"
    )
    return 0


def _cmd_random_search(args) -> int:
    return _cmd_tune(args, strategy="rs")


def _cmd_baseline(args) -> int:
    return _cmd_tune(args, strategy="baseline")


def _cmd_benchmark(args) -> int:
    space = _resolve_space(args.space) or boffin_preset()
    baseline = None
    if args.baseline_config is not None:
        baseline = _load_config_file(args.baseline_config)
    config = BenchmarkConfig(
        space=space,
        speaker_seeds=tuple(range(args.speaker_base, args.speaker_base + args.speakers)),
        run_seeds=tuple(range(args.seed, args.seed + args.n_seeds)),
        budget=args.budget,
        n_init=args.n_init,
        strategies=tuple(args.strategies.split(",")),
        family_params=_load_family(args.family_config),
        baseline_config=baseline,
        workers=args.workers,
    )
    summary = run_benchmark(config, out_dir=args.out)
    rates = ", ".join(f"{k} {v:.2f}" for k, v in sorted(summary.win_rates.items()))
    print(
        f"benchmark: {len(summary.results)} cells, {summary.n_failed} failed"
        + (f"; win rates: {rates}" if rates else "")
        + f"; artifacts in {args.out}"
    )
    return 1 if summary.all_failed else 0


def _cmd_mix_corpus(args) -> int:
    target = read_manifest(args.target)
    base = read_manifest(args.base)
    plan = MixPlan(target=target, base=base, ratio=args.ratio, seed=args.seed)
    mixed = mix(plan)
    validate_manifest(mixed, allow_duplicate_ids=True)
    write_manifest(mixed, args.out)
    print(f"mixed manifest: {len(mixed)} entries -> {args.out}")
    return 0


def _cmd_split(args) -> int:
    entries = read_manifest(args.manifest)
    train, validation = split_holdout(entries, fraction=args.fraction, seed=args.seed)
    out_dir = Path(args.out)
    suffix = ".csv" if Path(args.manifest).suffix.lower() == ".csv" else ".jsonl"
    write_manifest(train, out_dir / f"train{suffix}")
    write_manifest(validation, out_dir / f"validation{suffix}")
    print(f"split: {len(train)} train / {len(validation)} validation -> {out_dir}")
    return 0


def _add_seed_out(parser, out_default: str) -> None:
    parser.add_argument("--seed", type=int, default=0, help="root seed (default 0)")
    parser.add_argument("--out", default=out_default, help=f"output path (default {out_default})")


def _add_objective_flags(parser) -> None:
    parser.add_argument(
        "--objective",
        required=True,
        help=f"one of {'|'.join(SYNTHETIC_NAMES)}, surrogate:SEED, or external:COMMAND",
    )
    parser.add_argument(
        "--space",
        default=None,
        help=f"search-space JSON file or '{PRESET_NAME}' (default: objective's own "
        f"space for synthetics, else the preset)",
    )
    parser.add_argument(
        "--family-config",
        default=None,
        help="JSON file of surrogate-family parameters (surrogate objectives only)",
    )
    parser.add_argument(
        "--timeout-s",
        type=float,
        default=None,
        help="external-objective timeout in seconds (env BOFFIN_TIMEOUT_S overrides)",
    )


def _add_budget_flags(parser) -> None:
    parser.add_argument("--budget", type=int, default=50, help="total trials (default 50)")
    parser.add_argument(
        "--n-init",
        type=int,
        default=DEFAULT_N_INIT,
        help=f"random trials before model-based proposals (default {DEFAULT_N_INIT})",
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="boffin",
        description="Hyperparameter tuning via Bayesian optimization, with "
        "random-search and fixed-baseline comparators and corpus utilities.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    tune = sub.add_parser("tune", help="run one tuning strategy")
    tune.add_argument(
        "--strategy", choices=STRATEGIES, default="bo", help="tuning strategy (default bo)"
    )
    _add_objective_flags(tune)
    _add_budget_flags(tune)
    tune.add_argument(
        "--baseline-config",
        default=None,
        help="JSON configuration file (required with --strategy baseline)",
    )
    _add_seed_out(tune, "boffin_out")
    tune.set_defaults(func=_cmd_tune)

    rs = sub.add_parser("random-search", help="alias for tune --strategy rs")
    _add_objective_flags(rs)
    _add_budget_flags(rs)
    _add_seed_out(rs, "boffin_out")
    rs.set_defaults(func=_cmd_random_search)

    baseline = sub.add_parser("baseline", help="evaluate one fixed configuration")
    _add_objective_flags(baseline)
    baseline.add_argument(
        "--baseline-config", required=True, help="JSON configuration file to evaluate"
    )
    _add_seed_out(baseline, "boffin_out")
    baseline.set_defaults(func=_cmd_baseline)

    bench = sub.add_parser(
        "benchmark", help="compare strategies across a family of speaker surrogates"
    )
    bench.add_argument("--speakers", type=int, default=20, help="number of speakers (default 20)")
    bench.add_argument(
        "--speaker-base", type=int, default=0, help="first speaker seed (default 0)"
    )
    bench.add_argument(
        "--n-seeds", type=int, default=5, help="tuner seeds per cell, starting at --seed (default 5)"
    )
    _add_budget_flags(bench)
    bench.add_argument(
        "--strategies",
        default=",".join(STRATEGIES),
        help=f"comma-separated subset of {{{','.join(STRATEGIES)}}}",
    )
    bench.add_argument(
        "--space", default=None, help=f"search-space JSON file or '{PRESET_NAME}' (default preset)"
    )
    bench.add_argument(
        "--family-config", default=None, help="JSON file of surrogate-family parameters"
    )
    bench.add_argument(
        "--baseline-config",
        default=None,
        help="JSON configuration for the baseline strategy (default: space center)",
    )
    bench.add_argument("--workers", type=int, default=1, help="worker threads (default 1)")
    _add_seed_out(bench, "boffin_benchmark")
    bench.set_defaults(func=_cmd_benchmark)

    mix_cmd = sub.add_parser("mix-corpus", help="mix rehearsal data into a target manifest")
    mix_cmd.add_argument("--target", required=True, help="target manifest (JSONL or CSV)")
    mix_cmd.add_argument("--base", required=True, help="base-pool manifest (JSONL or CSV)")
    mix_cmd.add_argument(
        "--ratio", type=float, required=True, help="base fraction of the mixed output, in [0, 1)"
    )
    _add_seed_out(mix_cmd, "mixed.jsonl")
    mix_cmd.set_defaults(func=_cmd_mix_corpus)

    split_cmd = sub.add_parser("split", help="hold out a validation fraction of a manifest")
    split_cmd.add_argument("--manifest", required=True, help="input manifest (JSONL or CSV)")
    split_cmd.add_argument(
        "--fraction", type=float, required=True, help="validation fraction, in (0, 1)"
    )
    _add_seed_out(split_cmd, "boffin_split")
    split_cmd.set_defaults(func=_cmd_split)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ManifestError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except ObjectiveFailure as exc:
        print(f"error: objective failed: {exc}", file=sys.stderr)
        return 1
    except (ValueError, OSError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
