"""Benchmark harness comparing tuning strategies across speaker surrogates.

Runs every (strategy, speaker, seed) cell, aggregates final incumbents into
per-speaker medians and win rates, and emits per-run trial logs plus a
mean/standard-error incumbent trace per strategy.
"""

from __future__ import annotations

import json
import statistics
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ._validation import check_count
from .objectives import SurrogateFamilyParams, make_speaker_surrogate
from .space import Configuration, SearchSpace
from .tuner import (
    DEFAULT_N_INIT,
    History,
    TunerConfig,
    run_baseline,
    run_bo,
    run_random_search,
)

STRATEGIES = ("bo", "rs", "baseline")


def center_configuration(space: SearchSpace) -> Configuration:
    """Fixed comparator configuration: the decoded center of the cube."""
    return space.decode(np.full(space.dimension, 0.5))


@dataclass(frozen=True)
class BenchmarkConfig:
    """Full description of a benchmark: who runs, on what, how often.

    Attributes:
        space: Search space shared by every cell.
        speaker_seeds: One surrogate landscape per entry.
        run_seeds: Tuner seeds; every strategy sees every seed.
        budget: Trials per run.
        n_init: Random trials before model-guided proposals.
        strategies: Subset of {bo, rs, baseline}, at least one.
        family_params: Surrogate family; None means defaults.
        baseline_config: Fixed comparator; None means the space center.
        workers: Worker threads for independent cells.
    """

    space: SearchSpace
    speaker_seeds: tuple[int, ...]
    run_seeds: tuple[int, ...]
    budget: int = 50
    n_init: int = DEFAULT_N_INIT
    strategies: tuple[str, ...] = STRATEGIES
    family_params: SurrogateFamilyParams | None = None
    baseline_config: Configuration | None = None
    workers: int = 1

    def __post_init__(self) -> None:
        object.__setattr__(self, "speaker_seeds", tuple(self.speaker_seeds))
        object.__setattr__(self, "run_seeds", tuple(self.run_seeds))
        object.__setattr__(self, "strategies", tuple(self.strategies))
        if not self.speaker_seeds:
            raise ValueError("at least one speaker seed is required")
        if not self.run_seeds:
            raise ValueError("at least one run seed is required")
        if not self.strategies:
            raise ValueError("at least one strategy is required")
        unknown = [s for s in self.strategies if s not in STRATEGIES]
        if unknown:
            raise ValueError(f"unknown strategies {unknown}; choose from {STRATEGIES}")
        check_count(self.budget, "budget", minimum=1)
        check_count(self.n_init, "n_init", minimum=1)
        check_count(self.workers, "workers", minimum=1)
        if self.n_init > self.budget:
            raise ValueError(f"n_init ({self.n_init}) must not exceed budget ({self.budget})")

    def resolved_baseline(self) -> Configuration:
        if self.baseline_config is not None:
            return dict(self.baseline_config)
        return center_configuration(self.space)

    def cells(self) -> list[tuple[str, int, int]]:
        """All (strategy, speaker_seed, run_seed) combinations, in order."""
        return [
            (strategy, speaker, seed)
            for strategy in self.strategies
            for speaker in self.speaker_seeds
            for seed in self.run_seeds
        ]


@dataclass(frozen=True)
class CellResult:
    """Outcome of one (strategy, speaker, seed) run."""

    strategy: str
    speaker_seed: int
    run_seed: int
    history: History | None
    error: str | None = None

    @property
    def failed(self) -> bool:
        return self.history is None

    @property
    def final_score(self) -> float | None:
        if self.history is None:
            return None
        return self.history.best_trial().score

    @property
    def best_config(self) -> Configuration | None:
        if self.history is None:
            return None
        return dict(self.history.best_trial().config)


@dataclass(frozen=True)
class BenchmarkSummary:
    """Aggregated benchmark outcome.

    Attributes:
        config: The benchmark description that produced it.
        results: One CellResult per cell, in config.cells() order.
        medians: strategy -> speaker -> median final score over seeds
            (None when every seed failed).
        win_rates: comparison name -> fraction of speakers won by BO.
        traces: strategy -> list of (trial index, mean, standard error)
            across that strategy's successful runs.
        best_configs: strategy -> speaker -> best configuration over seeds.
    """

    config: BenchmarkConfig
    results: tuple[CellResult, ...]
    medians: dict = field(default_factory=dict)
    win_rates: dict = field(default_factory=dict)
    traces: dict = field(default_factory=dict)
    best_configs: dict = field(default_factory=dict)

    @property
    def n_failed(self) -> int:
        return sum(r.failed for r in self.results)

    @property
    def all_failed(self) -> bool:
        return self.n_failed == len(self.results)

    def to_dict(self) -> dict:
        """JSON-ready summary document (traces live in their own CSVs)."""
        cells = [
            {
                "strategy": r.strategy,
                "speaker_seed": r.speaker_seed,
                "run_seed": r.run_seed,
                "final_score": r.final_score,
                "error": r.error,
            }
            for r in self.results
        ]
        medians = {
            strategy: {str(speaker): value for speaker, value in per_speaker.items()}
            for strategy, per_speaker in self.medians.items()
        }
        best_configs = {
            strategy: {str(speaker): cfg for speaker, cfg in per_speaker.items()}
            for strategy, per_speaker in self.best_configs.items()
        }
        family = self.config.family_params or SurrogateFamilyParams()
        return {
            "space": self.config.space.to_dict(),
            "strategies": list(self.config.strategies),
            "speaker_seeds": list(self.config.speaker_seeds),
            "run_seeds": list(self.config.run_seeds),
            "budget": self.config.budget,
            "n_init": self.config.n_init,
            "family_params": family.to_dict(),
            "baseline_config": self.config.resolved_baseline(),
            "n_cells": len(self.results),
            "n_failed": self.n_failed,
            "cells": cells,
            "medians": medians,
            "win_rates": dict(self.win_rates),
            "best_configs": best_configs,
        }


def _run_cell(config: BenchmarkConfig, strategy: str, speaker: int, seed: int) -> CellResult:
    objective = make_speaker_surrogate(config.space, speaker, config.family_params)
    try:
        if strategy == "bo":
            history = run_bo(
                objective,
                TunerConfig(config.space, config.budget, n_init=config.n_init, seed=seed),
            )
        elif strategy == "rs":
            history = run_random_search(
                objective,
                TunerConfig(config.space, config.budget, n_init=config.n_init, seed=seed),
            )
        else:
            history = run_baseline(objective, config.resolved_baseline(), seed=seed)
    except Exception as exc:
        return CellResult(strategy, speaker, seed, history=None, error=str(exc))
    return CellResult(strategy, speaker, seed, history=history)


def _median_or_none(values: list[float]):
    return statistics.median(values) if values else None


def _aggregate(config: BenchmarkConfig, results: list[CellResult]) -> BenchmarkSummary:
    by_cell = {(r.strategy, r.speaker_seed, r.run_seed): r for r in results}

    medians: dict = {}
    best_configs: dict = {}
    for strategy in config.strategies:
        medians[strategy] = {}
        best_configs[strategy] = {}
        for speaker in config.speaker_seeds:
            cells = [
                by_cell[(strategy, speaker, seed)]
                for seed in config.run_seeds
                if not by_cell[(strategy, speaker, seed)].failed
            ]
            finals = [c.final_score for c in cells]
            medians[strategy][speaker] = _median_or_none(finals)
            if cells:
                winner = min(cells, key=lambda c: c.final_score)
                best_configs[strategy][speaker] = winner.best_config

    win_rates: dict = {}
    if "bo" in config.strategies:
        for rival in ("rs", "baseline"):
            if rival not in config.strategies:
                continue
            wins = 0
            for speaker in config.speaker_seeds:
                ours = medians["bo"][speaker]
                theirs = medians[rival][speaker]
                if ours is not None and theirs is not None and ours < theirs:
                    wins += 1
            win_rates[f"bo_vs_{rival}"] = wins / len(config.speaker_seeds)

    traces: dict = {}
    for strategy in config.strategies:
        rows = [
            r.history.incumbent_trace
            for r in results
            if r.strategy == strategy and not r.failed
        ]
        if not rows:
            traces[strategy] = []
            continue
        matrix = np.asarray(rows, dtype=float)
        mean = np.nanmean(matrix, axis=0)
        if matrix.shape[0] > 1:
            se = np.nanstd(matrix, axis=0, ddof=1) / np.sqrt(matrix.shape[0])
        else:
            se = np.zeros(matrix.shape[1])
        traces[strategy] = [
            (index, float(m), float(s)) for index, (m, s) in enumerate(zip(mean, se))
        ]

    return BenchmarkSummary(
        config=config,
        results=tuple(results),
        medians=medians,
        win_rates=win_rates,
        traces=traces,
        best_configs=best_configs,
    )


def trace_csv(trace) -> str:
    """Render one strategy's (index, mean, se) trace as CSV text."""
    lines = ["index,mean,se"]
    for index, mean, se in trace:
        lines.append(f"{index},{mean!r},{se!r}")
    return "\n".join(lines) + "\n"


def write_artifacts(summary: BenchmarkSummary, out_dir) -> None:
    """Write per-run logs, per-strategy trace CSVs, and summary.json."""
    out = Path(out_dir)
    for result in summary.results:
        if result.failed:
            continue
        run_dir = (
            out
            / "runs"
            / result.strategy
            / f"speaker_{result.speaker_seed}"
            / f"seed_{result.run_seed}"
        )
        run_dir.mkdir(parents=True, exist_ok=True)
        (run_dir / "trials.jsonl").write_text(result.history.to_jsonl())
        (run_dir / "incumbent.csv").write_text(result.history.incumbent_csv())
    traces_dir = out / "traces"
    traces_dir.mkdir(parents=True, exist_ok=True)
    for strategy, trace in summary.traces.items():
        (traces_dir / f"{strategy}_trace.csv").write_text(trace_csv(trace))
    out.mkdir(parents=True, exist_ok=True)
    (out / "summary.json").write_text(json.dumps(summary.to_dict(), indent=2) + "\n")


def run_benchmark(config: BenchmarkConfig, out_dir=None) -> BenchmarkSummary:
    """Run every cell, aggregate, and optionally write artifacts.

    Args:
        config: What to run.
        out_dir: When given, artifacts are written beneath it.

    Returns:
        The aggregated summary; failures are recorded per cell rather than
        raised, so callers can distinguish partial from total failure.
    """
    cells = config.cells()
    if config.workers > 1:
        with ThreadPoolExecutor(max_workers=config.workers) as pool:
            results = list(
                pool.map(lambda cell: _run_cell(config, *cell), cells)
            )
    else:
        results = [_run_cell(config, *cell) for cell in cells]
    summary = _aggregate(config, results)
    if out_dir is not None:
        write_artifacts(summary, out_dir)
    return summary
