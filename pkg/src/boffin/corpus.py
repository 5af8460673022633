"""Corpus-manifest utilities for adaptation runs.

Manifests are lists of utterance entries (plain dicts). The module covers
the three pieces of strategy plumbing around the tuner: holding out a
validation fraction, mixing rehearsal data from base speakers by ratio, and
an early-stopping monitor over validation losses.
"""

import csv
import io
import json
import math
import warnings
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from boffin._validation import check_count

MANIFEST_FIELDS = ("utterance_id", "speaker_id", "audio_path", "text", "duration_s")
CSV_HEADER = ",".join(MANIFEST_FIELDS)

Entry = dict


class ManifestError(ValueError):
    """A manifest violates its schema; carries the offending line number."""

    def __init__(self, message: str, line: int | None = None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


def _check_entry(entry: Entry, line: int | None = None) -> Entry:
    if not isinstance(entry, dict):
        raise ManifestError(f"expected an object, got {type(entry).__name__}", line)
    missing = [f for f in MANIFEST_FIELDS if f not in entry]
    if missing:
        raise ManifestError(f"missing fields {missing}", line)
    duration = entry["duration_s"]
    if duration is not None:
        try:
            duration = float(duration)
        except (TypeError, ValueError):
            raise ManifestError(f"duration_s must be a number, got {duration!r}", line) from None
        if not math.isfinite(duration) or duration <= 0:
            raise ManifestError(f"duration_s must be > 0, got {duration}", line)
        entry = {**entry, "duration_s": duration}
    return entry


def validate_manifest(entries, allow_duplicate_ids: bool = False) -> None:
    """Check manifest invariants: fields present, positive durations, and
    unique utterance ids (unless duplicates are explicitly allowed, as in a
    with-replacement mix)."""
    seen = set()
    for i, entry in enumerate(entries):
        _check_entry(entry, line=None)
        uid = entry["utterance_id"]
        if not allow_duplicate_ids:
            if uid in seen:
                raise ManifestError(f"duplicate utterance_id {uid!r} at entry {i}")
            seen.add(uid)


def read_manifest(path) -> list[Entry]:
    """Read a manifest from JSONL or CSV (decided by file extension).

    Malformed lines raise ManifestError naming the line number.
    """
    path = Path(path)
    if path.suffix.lower() == ".csv":
        return _read_csv(path)
    entries = []
    with path.open() as fh:
        for lineno, raw in enumerate(fh, start=1):
            if not raw.strip():
                continue
            try:
                doc = json.loads(raw)
            except json.JSONDecodeError as exc:
                raise ManifestError(f"invalid JSON ({exc.msg})", lineno) from exc
            entries.append(_check_entry(doc, lineno))
    return entries


def _read_csv(path: Path) -> list[Entry]:
    entries = []
    with path.open(newline="") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        missing = [f for f in MANIFEST_FIELDS if f not in header]
        if missing:
            raise ManifestError(f"CSV header missing fields {missing}", line=1)
        for entry in reader:
            entries.append(_check_entry(dict(entry), reader.line_num))
    return entries


def write_manifest(entries, path) -> None:
    """Write a manifest as JSONL or CSV (decided by file extension)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    if path.suffix.lower() == ".csv":
        fields = list(MANIFEST_FIELDS)
        if any("origin" in e for e in entries):
            fields.append("origin")
        buffer = io.StringIO()
        writer = csv.DictWriter(buffer, fieldnames=fields, lineterminator="\n")
        writer.writeheader()
        for entry in entries:
            writer.writerow({f: entry.get(f, "") for f in fields})
        path.write_text(buffer.getvalue())
        return
    with path.open("w") as fh:
        for entry in entries:
            fh.write(json.dumps(entry) + "\n")


def split_holdout(entries, fraction: float, seed: int) -> tuple[list[Entry], list[Entry]]:
    """Partition a manifest into train and validation parts.

    The validation size is round-half-up(fraction * n), drawn uniformly
    without replacement; both parts keep the manifest's original order.

    Args:
        entries: Non-empty manifest.
        fraction: Validation fraction, strictly between 0 and 1.
        seed: Sampling seed.

    Returns:
        (train, validation) lists; together they are exactly the input.
    """
    entries = list(entries)
    if not entries:
        raise ValueError("manifest is empty")
    if not 0.0 < fraction < 1.0:
        raise ValueError(f"fraction must be in (0, 1), got {fraction}")
    n = len(entries)
    n_val = int(math.floor(fraction * n + 0.5))
    n_val = min(max(n_val, 0), n)
    rng = np.random.default_rng(seed)
    val_idx = set(rng.choice(n, size=n_val, replace=False).tolist())
    train = [e for i, e in enumerate(entries) if i not in val_idx]
    validation = [e for i, e in enumerate(entries) if i in val_idx]
    return train, validation


@dataclass(frozen=True)
class MixPlan:
    """Rehearsal-mix request: target corpus, base pool, ratio, seed.

    ratio is the fraction of base-speaker utterances in the mixed output
    (utterance-count semantics).
    """

    target: tuple
    base: tuple
    ratio: float
    seed: int = 0

    def __post_init__(self) -> None:
        object.__setattr__(self, "target", tuple(self.target))
        object.__setattr__(self, "base", tuple(self.base))
        if not 0.0 <= self.ratio <= 1.0:
            raise ValueError(f"ratio must be in [0, 1], got {self.ratio}")


def mix(plan: MixPlan) -> list[Entry]:
    """Mix rehearsal utterances from the base pool into the target corpus.

    Adds b = round-half-up(ratio * n_target / (1 - ratio)) base entries so
    the base fraction of the output approximates the ratio. Draws without
    replacement when the pool allows, otherwise with replacement and a
    warning. When base entries are added, every output entry gains an
    origin field ("target" or "base"); a pure-target result (b = 0) is the
    target manifest unchanged.

    Args:
        plan: The mix request; ratio 1 is rejected (no finite composition).

    Returns:
        Target entries followed by the sampled base entries.
    """
    if plan.ratio == 1.0:
        raise ValueError("ratio 1 is undefined: the mix would contain no target data")
    if not plan.target:
        raise ValueError("target manifest is empty")
    n_target = len(plan.target)
    b = int(math.floor(plan.ratio * n_target / (1.0 - plan.ratio) + 0.5))
    if b == 0:
        return [dict(e) for e in plan.target]
    target = [{**e, "origin": "target"} for e in plan.target]
    if not plan.base:
        raise ValueError("base manifest is empty but the ratio requests base entries")
    rng = np.random.default_rng(plan.seed)
    if b > len(plan.base):
        warnings.warn(
            f"base pool ({len(plan.base)}) smaller than requested draw ({b}); "
            "sampling with replacement",
            stacklevel=2,
        )
        idx = rng.choice(len(plan.base), size=b, replace=True)
    else:
        idx = rng.choice(len(plan.base), size=b, replace=False)
    base = [{**plan.base[i], "origin": "base"} for i in idx.tolist()]
    return target + base


@dataclass(frozen=True)
class EarlyStopState:
    """Patience monitor over a validation-loss stream.

    Attributes:
        patience: Non-improving steps tolerated before stopping.
        min_delta: Improvement must beat the best loss by more than this.
        best_loss: Best loss seen; infinity before the first update.
        best_step: Step of the best loss; -1 before the first update.
        steps_since_improvement: Consecutive non-improving updates.
        last_step: Last step seen, enforcing a strictly increasing stream.
    """

    patience: int = 5
    min_delta: float = 0.0
    best_loss: float = math.inf
    best_step: int = -1
    steps_since_improvement: int = 0
    last_step: int = -1

    def __post_init__(self) -> None:
        check_count(self.patience, "patience", minimum=0)
        if self.min_delta < 0:
            raise ValueError(f"min_delta must be >= 0, got {self.min_delta}")


def early_stop_update(
    state: EarlyStopState, step: int, validation_loss: float
) -> tuple[EarlyStopState, bool]:
    """Advance the monitor by one validation measurement.

    Improvement means loss < best_loss - min_delta; it resets the counter
    and records the new best. Otherwise the counter increments and the stop
    flag raises once it exceeds the patience.

    Args:
        state: Current monitor state (returned states are new values).
        step: Strictly increasing step number.
        validation_loss: Loss at this step.

    Returns:
        (new_state, should_stop).
    """
    if step <= state.last_step:
        raise ValueError(f"step {step} is not greater than the last step {state.last_step}")
    if not math.isfinite(validation_loss):
        raise ValueError(f"validation_loss must be finite, got {validation_loss}")
    if validation_loss < state.best_loss - state.min_delta:
        new_state = replace(
            state,
            best_loss=validation_loss,
            best_step=step,
            steps_since_improvement=0,
            last_step=step,
        )
        return new_state, False
    counter = state.steps_since_improvement + 1
    new_state = replace(state, steps_since_improvement=counter, last_step=step)
    return new_state, counter > state.patience
