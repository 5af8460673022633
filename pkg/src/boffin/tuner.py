"""Optimisation-loop orchestration.

run_bo evaluates a seeded random initialisation and then iterates
fit-maximise-evaluate; run_random_search and run_baseline are the
comparators. All randomness derives from the run seed through fixed,
purpose-keyed streams, so histories are reproducible trial for trial and
the two search strategies share their initialisation prefix exactly.
"""

import json
import math
import time
from dataclasses import dataclass

import numpy as np

from boffin._validation import check_count
from boffin.acquisition import incumbent_of, maximize
from boffin.gp import GaussianProcess
from boffin.objectives import Objective, ObjectiveFailure
from boffin.space import Configuration, SearchSpace

DEFAULT_N_INIT = 10

# Purpose keys for deriving independent seed streams from the run seed.
_SAMPLE_STREAM = 0
_FIT_STREAM = 1
_ACQ_STREAM = 2
_EVAL_STREAM = 3

PHASES = ("init", "bo", "rs", "baseline")


def _stream_seed(seed: int, stream: int, index: int) -> int:
    return int(np.random.SeedSequence((seed, stream, index)).generate_state(1)[0])


def _sampler(seed: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence((seed, _SAMPLE_STREAM)))


@dataclass(frozen=True)
class TunerConfig:
    """Settings of one tuning run.

    Attributes:
        space: Search space to optimise over.
        budget: Total number of evaluations.
        n_init: Random evaluations before the model-based phase.
        seed: Root seed of every random draw in the run.
    """

    space: SearchSpace
    budget: int
    n_init: int = DEFAULT_N_INIT
    seed: int = 0

    def __post_init__(self) -> None:
        check_count(self.budget, "budget", minimum=1)
        check_count(self.n_init, "n_init", minimum=1)
        check_count(self.seed, "seed", minimum=0)
        if self.n_init > self.budget:
            raise ValueError(f"n_init ({self.n_init}) must not exceed budget ({self.budget})")


@dataclass(frozen=True)
class TrialRecord:
    """One configuration-score evaluation.

    A trial with score None failed; its error message is kept and it is
    excluded from surrogate training and incumbent tracking. Wall time is
    recorded for reporting only and is not serialised, so rerunning a seed
    reproduces the serialised history byte for byte.
    """

    index: int
    config: Configuration
    score: float | None
    phase: str
    wall_time_s: float = 0.0
    error: str | None = None

    @property
    def failed(self) -> bool:
        return self.score is None

    def to_json_dict(self) -> dict:
        return {
            "index": self.index,
            "phase": self.phase,
            "config": self.config,
            "score": self.score,
            "failed": self.failed,
            "error": self.error,
        }

    @classmethod
    def from_json_dict(cls, doc: dict) -> "TrialRecord":
        return cls(
            index=int(doc["index"]),
            config=dict(doc["config"]),
            score=None if doc["score"] is None else float(doc["score"]),
            phase=doc["phase"],
            error=doc.get("error"),
        )


@dataclass(frozen=True)
class History:
    """Ordered log of all evaluations of one run."""

    trials: tuple[TrialRecord, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "trials", tuple(self.trials))

    def __len__(self) -> int:
        return len(self.trials)

    @property
    def incumbent_trace(self) -> list[float]:
        """Best-so-far score per trial; NaN before the first success."""
        best = math.nan
        trace = []
        for trial in self.trials:
            if not trial.failed and not (best <= trial.score):  # NaN-aware running min
                best = trial.score
            trace.append(best)
        return trace

    def best_trial(self) -> TrialRecord:
        """Earliest trial achieving the minimum score."""
        best = None
        for trial in self.trials:
            if trial.failed:
                continue
            if best is None or trial.score < best.score:
                best = trial
        if best is None:
            raise ValueError("history has no successful trials")
        return best

    def to_jsonl(self) -> str:
        return "".join(json.dumps(t.to_json_dict()) + "\n" for t in self.trials)

    @classmethod
    def from_jsonl(cls, text: str) -> "History":
        trials = []
        for line in text.splitlines():
            if line.strip():
                trials.append(TrialRecord.from_json_dict(json.loads(line)))
        return cls(trials=tuple(trials))

    def incumbent_csv(self) -> str:
        """Incumbent trace as CSV with header index,best_score."""
        lines = ["index,best_score"]
        for trial, best in zip(self.trials, self.incumbent_trace):
            lines.append(f"{trial.index},{best!r}")
        return "\n".join(lines) + "\n"


def incumbent_trace(history: History) -> list[tuple[int, float]]:
    """Running minimum over non-failed trials as (index, best_score) pairs.

    Raises:
        ValueError: On an empty history.
    """
    if len(history) == 0:
        raise ValueError("history is empty")
    return [(t.index, best) for t, best in zip(history.trials, history.incumbent_trace)]


def _evaluate_trial(
    objective: Objective,
    config: Configuration,
    index: int,
    phase: str,
    seed: int,
) -> TrialRecord:
    eval_seed = _stream_seed(seed, _EVAL_STREAM, index)
    start = time.perf_counter()
    try:
        score = float(objective.evaluate(config, eval_seed, trial_index=index))
        if not math.isfinite(score):
            raise ObjectiveFailure(f"objective returned a non-finite score: {score}")
    except ObjectiveFailure as exc:
        return TrialRecord(
            index=index,
            config=config,
            score=None,
            phase=phase,
            wall_time_s=time.perf_counter() - start,
            error=str(exc),
        )
    return TrialRecord(
        index=index,
        config=config,
        score=score,
        phase=phase,
        wall_time_s=time.perf_counter() - start,
    )


def _finish(trials: list[TrialRecord]) -> History:
    history = History(trials=tuple(trials))
    if all(t.failed for t in trials):
        last_error = trials[-1].error if trials else "no trials"
        raise RuntimeError(f"all {len(trials)} trials failed; last error: {last_error}")
    return history


def run_bo(objective: Objective, cfg: TunerConfig) -> History:
    """Bayesian-optimisation loop: seeded initialisation, then fit and
    maximise expected improvement for every remaining evaluation.

    Failed trials are recorded and excluded from the surrogate; if no
    successful trial exists yet at a model-based step, the step falls back
    to a random draw from the shared sampling stream.

    Args:
        objective: Score function; must accept the space's configurations.
        cfg: Budgets, seed, and space.

    Returns:
        The complete History, deterministic for a fixed seed and
        deterministic objective.

    Raises:
        RuntimeError: If every trial failed.
    """
    sampler = _sampler(cfg.seed)
    trials: list[TrialRecord] = []
    for index in range(cfg.budget):
        if index < cfg.n_init:
            phase = "init"
            config = cfg.space.sample(sampler, 1)[0]
        else:
            phase = "bo"
            succeeded = [(t.index, t.config, t.score) for t in trials if not t.failed]
            if not succeeded:
                config = cfg.space.sample(sampler, 1)[0]
            else:
                X = cfg.space.transform([c for _, c, _ in succeeded])
                y = np.array([s for _, _, s in succeeded])
                model = GaussianProcess(
                    random_state=_stream_seed(cfg.seed, _FIT_STREAM, index)
                ).fit(X, y)
                proposal = maximize(
                    model,
                    cfg.space,
                    incumbent_of(succeeded),
                    rng_seed=_stream_seed(cfg.seed, _ACQ_STREAM, index),
                    exclude=[t.config for t in trials],
                )
                config = proposal.config
        trials.append(_evaluate_trial(objective, config, index, phase, cfg.seed))
    return _finish(trials)


def run_random_search(objective: Objective, cfg: TunerConfig) -> History:
    """Uniform random search drawing from the same stream as run_bo.

    The first n_init trials are labelled "init" and coincide exactly with
    run_bo's initialisation under the same seed; the rest are "rs".
    """
    sampler = _sampler(cfg.seed)
    trials = []
    for index in range(cfg.budget):
        phase = "init" if index < cfg.n_init else "rs"
        config = cfg.space.sample(sampler, 1)[0]
        trials.append(_evaluate_trial(objective, config, index, phase, cfg.seed))
    return _finish(trials)


def run_baseline(objective: Objective, baseline_config: Configuration, seed: int = 0) -> History:
    """Evaluate one fixed configuration; the non-tuned comparator.

    Args:
        objective: Score function.
        baseline_config: The fixed configuration, valid for the objective's
            space.
        seed: Run seed; only the trial's evaluation seed derives from it.

    Returns:
        A single-trial History with phase "baseline".

    Raises:
        ObjectiveFailure: If the evaluation fails (not recorded as a failed
            trial; the baseline has nothing else to report).
    """
    space = getattr(objective, "space", None)
    if isinstance(space, SearchSpace):
        space.validate(baseline_config)
    eval_seed = _stream_seed(seed, _EVAL_STREAM, 0)
    start = time.perf_counter()
    score = float(objective.evaluate(baseline_config, eval_seed, trial_index=0))
    record = TrialRecord(
        index=0,
        config=baseline_config,
        score=score,
        phase="baseline",
        wall_time_s=time.perf_counter() - start,
    )
    return History(trials=(record,))
