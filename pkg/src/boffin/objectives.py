"""Score functions the tuner can optimise.

Three kinds: classic synthetic benchmarks, a seeded family of per-speaker
surrogate losses whose optima move from speaker to speaker, and a file-based
protocol for scoring configurations with an external training process.
Scores are always minimised.
"""

import hashlib
import json
import math
import os
import subprocess
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from boffin._validation import check_positive_scalar
from boffin.space import Configuration, ParameterSpec, SearchSpace

DEFAULT_TIMEOUT_S = 86_400.0  # real adaptation runs are hours-long
TIMEOUT_ENV_VAR = "BOFFIN_TIMEOUT_S"

# Module names passed through to external trainers, which conventionally
# unfreeze only the speaker embedding and decoder during adaptation.
TRAINABLE_MODULES = ("speaker_embedding", "decoder")


class ObjectiveFailure(Exception):
    """An objective could not produce a score.

    Attributes:
        diagnostics: Captured context such as stderr, exit codes, paths.
    """

    def __init__(self, message: str, diagnostics: dict | None = None):
        super().__init__(message)
        self.diagnostics = dict(diagnostics or {})


class Objective:
    """Base interface: score a configuration, lower is better."""

    kind = "synthetic"
    space: SearchSpace

    def evaluate(self, config: Configuration, eval_seed: int, trial_index: int = 0) -> float:
        raise NotImplementedError


def evaluate(objective: Objective, config: Configuration, eval_seed: int, trial_index: int = 0) -> float:
    """Score ``config`` with ``objective``; deterministic given the seed."""
    return objective.evaluate(config, eval_seed, trial_index=trial_index)


class FunctionObjective(Objective):
    """Wraps a plain function of the configuration dict."""

    kind = "synthetic"

    def __init__(self, space: SearchSpace, fn, name: str = "custom"):
        self.space = space
        self.fn = fn
        self.name = name

    def evaluate(self, config: Configuration, eval_seed: int, trial_index: int = 0) -> float:
        self.space.validate(config)
        return float(self.fn(config))


def _branin(config: Configuration) -> float:
    x1, x2 = config["x1"], config["x2"]
    a, b, c = 1.0, 5.1 / (4.0 * math.pi**2), 5.0 / math.pi
    r, s, t = 6.0, 10.0, 1.0 / (8.0 * math.pi)
    return a * (x2 - b * x1**2 + c * x1 - r) ** 2 + s * (1.0 - t) * math.cos(x1) + s


_HARTMANN6_ALPHA = np.array([1.0, 1.2, 3.0, 3.2])
_HARTMANN6_A = np.array(
    [
        [10.0, 3.0, 17.0, 3.5, 1.7, 8.0],
        [0.05, 10.0, 17.0, 0.1, 8.0, 14.0],
        [3.0, 3.5, 1.7, 10.0, 17.0, 8.0],
        [17.0, 8.0, 0.05, 10.0, 0.1, 14.0],
    ]
)
_HARTMANN6_P = 1e-4 * np.array(
    [
        [1312, 1696, 5569, 124, 8283, 5886],
        [2329, 4135, 8307, 3736, 1004, 9991],
        [2348, 1451, 3522, 2883, 3047, 6650],
        [4047, 8828, 8732, 5743, 1091, 381],
    ]
)


def _hartmann6(config: Configuration) -> float:
    x = np.array([config[f"x{j + 1}"] for j in range(6)])
    inner = np.sum(_HARTMANN6_A * (x - _HARTMANN6_P) ** 2, axis=1)
    return float(-np.sum(_HARTMANN6_ALPHA * np.exp(-inner)))


def _sphere(config: Configuration) -> float:
    return config["x1"] ** 2 + config["x2"] ** 2


def _quadratic1d(config: Configuration) -> float:
    return (config["x"] - 0.3) ** 2


def _continuous(name: str, low: float, high: float) -> ParameterSpec:
    return ParameterSpec(name, "continuous", low, high)


_SYNTHETIC_BUILDERS = {
    "branin": (
        _branin,
        lambda: SearchSpace((_continuous("x1", -5.0, 10.0), _continuous("x2", 0.0, 15.0))),
    ),
    "hartmann6": (
        _hartmann6,
        lambda: SearchSpace(tuple(_continuous(f"x{j + 1}", 0.0, 1.0) for j in range(6))),
    ),
    "sphere": (
        _sphere,
        lambda: SearchSpace((_continuous("x1", -5.12, 5.12), _continuous("x2", -5.12, 5.12))),
    ),
    "quadratic1d": (_quadratic1d, lambda: SearchSpace((_continuous("x", 0.0, 1.0),))),
}

SYNTHETIC_NAMES = tuple(sorted(_SYNTHETIC_BUILDERS))


def synthetic_objective(name: str) -> FunctionObjective:
    """Named synthetic benchmark on its canonical space.

    Known names: branin (global minimum 0.397887), hartmann6 (-3.32237),
    sphere (0), quadratic1d (0 at x = 0.3).
    """
    if name not in _SYNTHETIC_BUILDERS:
        raise ValueError(f"unknown synthetic objective {name!r}, expected one of {SYNTHETIC_NAMES}")
    fn, space_builder = _SYNTHETIC_BUILDERS[name]
    return FunctionObjective(space_builder(), fn, name=name)


@dataclass(frozen=True)
class SurrogateFamilyParams:
    """Ranges from which per-speaker landscape parameters are drawn.

    Attributes:
        curvature_range: Uniform range of the per-dimension quadratic
            coefficients.
        rugged_amplitude: Amplitude of the sinusoidal ruggedness term.
        omega_range: Uniform range of the per-dimension angular frequencies.
        noise_sd: Standard deviation of optional Gaussian observation noise.
        floor: Minimum achievable loss of every family member.
    """

    curvature_range: tuple[float, float] = (1.0, 4.0)
    rugged_amplitude: float = 0.25
    omega_range: tuple[float, float] = (math.pi, 3.0 * math.pi)
    noise_sd: float = 0.0
    floor: float = 1.0

    def __post_init__(self) -> None:
        lo, hi = self.curvature_range
        if not 0 < lo <= hi:
            raise ValueError(f"curvature_range must be positive and ordered, got {self.curvature_range}")
        wlo, whi = self.omega_range
        if not 0 < wlo <= whi:
            raise ValueError(f"omega_range must be positive and ordered, got {self.omega_range}")
        check_positive_scalar(self.rugged_amplitude, "rugged_amplitude", inclusive=True)
        check_positive_scalar(self.noise_sd, "noise_sd", inclusive=True)
        if not math.isfinite(self.floor):
            raise ValueError("floor must be finite")

    def to_dict(self) -> dict:
        return {
            "curvature_range": list(self.curvature_range),
            "rugged_amplitude": self.rugged_amplitude,
            "omega_range": list(self.omega_range),
            "noise_sd": self.noise_sd,
            "floor": self.floor,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "SurrogateFamilyParams":
        kwargs = dict(doc)
        for key in ("curvature_range", "omega_range"):
            if key in kwargs:
                kwargs[key] = tuple(kwargs[key])
        return cls(**kwargs)


@dataclass(frozen=True)
class SpeakerSurrogateDescriptor:
    """Frozen landscape of one synthetic speaker.

    Attributes:
        speaker_seed: Seed all draws came from.
        optimum: Location of the loss minimum in unit coordinates.
        curvature: Per-dimension quadratic coefficients, positive.
        omega: Per-dimension ruggedness frequencies.
        rugged_amplitude: Ruggedness amplitude, >= 0.
        noise_sd: Observation-noise standard deviation, >= 0.
        floor: Loss value at the optimum when noise_sd is 0.
    """

    speaker_seed: int
    optimum: np.ndarray
    curvature: np.ndarray
    omega: np.ndarray
    rugged_amplitude: float
    noise_sd: float
    floor: float


class SpeakerSurrogate(Objective):
    """Per-speaker surrogate loss: quadratic bowl plus sinusoidal ruggedness.

    loss(u) = floor + sum_j c_j (u_j - u*_j)^2
            + rugged_amplitude * sum_j sin^2(omega_j (u_j - u*_j)) + noise,

    so the loss equals floor exactly at u* when noise_sd is 0. Noise is a
    deterministic function of (speaker, configuration, eval_seed).
    """

    kind = "speaker_surrogate"

    def __init__(self, space: SearchSpace, descriptor: SpeakerSurrogateDescriptor):
        if descriptor.optimum.size != space.dimension:
            raise ValueError("descriptor dimension does not match space")
        self.space = space
        self.descriptor = descriptor

    def evaluate(self, config: Configuration, eval_seed: int, trial_index: int = 0) -> float:
        u = self.space.encode(config)
        desc = self.descriptor
        delta = u - desc.optimum
        loss = (
            desc.floor
            + float(desc.curvature @ (delta * delta))
            + desc.rugged_amplitude * float(np.sum(np.sin(desc.omega * delta) ** 2))
        )
        if desc.noise_sd > 0.0:
            digest = hashlib.sha256(u.tobytes()).digest()
            words = np.frombuffer(digest[:16], dtype=np.uint32)
            entropy = (int(desc.speaker_seed), int(eval_seed), *(int(w) for w in words))
            rng = np.random.default_rng(np.random.SeedSequence(entropy))
            loss += desc.noise_sd * float(rng.standard_normal())
        return float(loss)


def make_speaker_surrogate(
    space: SearchSpace,
    speaker_seed: int,
    family_params: SurrogateFamilyParams | None = None,
) -> SpeakerSurrogate:
    """Draw one speaker's surrogate landscape deterministically from its seed.

    Args:
        space: Search space the surrogate scores configurations of.
        speaker_seed: Seed identifying the speaker; distinct seeds give
            distinct optima.
        family_params: Shared family ranges; defaults reproduce the
            benchmark family.

    Returns:
        The surrogate objective.
    """
    family = family_params or SurrogateFamilyParams()
    rng = np.random.default_rng(np.random.SeedSequence((int(speaker_seed),)))
    d = space.dimension
    descriptor = SpeakerSurrogateDescriptor(
        speaker_seed=int(speaker_seed),
        optimum=rng.random(d),
        curvature=rng.uniform(*family.curvature_range, size=d),
        omega=rng.uniform(*family.omega_range, size=d),
        rugged_amplitude=family.rugged_amplitude,
        noise_sd=family.noise_sd,
        floor=family.floor,
    )
    return SpeakerSurrogate(space, descriptor)


@dataclass(frozen=True)
class ExternalCommand:
    """Descriptor of an external scoring process.

    Attributes:
        command: Shell command executed in the trial directory; it reads
            config.json there and must write result.json.
        timeout_s: Wall-clock limit per trial; the BOFFIN_TIMEOUT_S
            environment variable overrides it.
    """

    command: str
    timeout_s: float = DEFAULT_TIMEOUT_S

    def __post_init__(self) -> None:
        if not self.command or not isinstance(self.command, str):
            raise ValueError("command must be a non-empty string")
        check_positive_scalar(self.timeout_s, "timeout_s")


def external_evaluate(
    descriptor: ExternalCommand,
    config: Configuration,
    workdir,
    trial_index: int = 0,
    seed: int = 0,
) -> float:
    """Score a configuration by running an external process.

    Writes ``config.json`` (configuration, trial metadata, and pass-through
    hints: trainable_modules, mixing_ratio, base_epoch) into ``workdir``,
    runs the command there, and reads ``{"score": ...}`` from
    ``result.json``. Exit code 0 is required.

    Args:
        descriptor: Command and timeout.
        config: Configuration to score.
        workdir: Directory for this trial's artifacts; created if needed.
        trial_index: Recorded in config.json.
        seed: Recorded in config.json for the trainer's own seeding.

    Returns:
        The reported score.

    Raises:
        ObjectiveFailure: On nonzero exit, timeout, or a missing/malformed
            result, with stderr captured in the diagnostics.
    """
    workdir = Path(workdir)
    workdir.mkdir(parents=True, exist_ok=True)
    payload = {
        "trial_index": int(trial_index),
        "seed": int(seed),
        "config": config,
        "hints": {
            "trainable_modules": list(TRAINABLE_MODULES),
            "mixing_ratio": config.get("mixing_ratio"),
            "base_epoch": config.get("base_epoch"),
        },
    }
    (workdir / "config.json").write_text(json.dumps(payload, indent=2))
    timeout = float(os.environ.get(TIMEOUT_ENV_VAR, descriptor.timeout_s))
    try:
        proc = subprocess.run(
            descriptor.command,
            shell=True,
            cwd=workdir,
            capture_output=True,
            text=True,
            timeout=timeout,
        )
    except subprocess.TimeoutExpired as exc:
        raise ObjectiveFailure(
            f"external command timed out after {timeout}s",
            {"stderr": exc.stderr or "", "command": descriptor.command},
        ) from exc
    if proc.returncode != 0:
        raise ObjectiveFailure(
            f"external command exited with status {proc.returncode}",
            {"stderr": proc.stderr, "stdout": proc.stdout, "command": descriptor.command},
        )
    result_path = workdir / "result.json"
    if not result_path.exists():
        raise ObjectiveFailure(
            "external command wrote no result.json", {"stderr": proc.stderr}
        )
    try:
        doc = json.loads(result_path.read_text())
    except json.JSONDecodeError as exc:
        raise ObjectiveFailure(
            f"malformed result.json: {exc}", {"stderr": proc.stderr}
        ) from exc
    score = doc.get("score") if isinstance(doc, dict) else None
    if isinstance(score, bool) or not isinstance(score, (int, float)) or not math.isfinite(score):
        raise ObjectiveFailure(
            f"result.json must contain a finite numeric score, got {score!r}",
            {"stderr": proc.stderr},
        )
    return float(score)


class ExternalObjective(Objective):
    """Objective scoring configurations through the external protocol.

    Each trial runs in its own subdirectory ``trial_NNNN`` of the working
    directory, leaving config.json/result.json behind for audit.
    """

    kind = "external"

    def __init__(self, space: SearchSpace, command: str, workdir, timeout_s: float = DEFAULT_TIMEOUT_S):
        self.space = space
        self.descriptor = ExternalCommand(command=command, timeout_s=timeout_s)
        self.workdir = Path(workdir)

    def evaluate(self, config: Configuration, eval_seed: int, trial_index: int = 0) -> float:
        self.space.validate(config)
        trial_dir = self.workdir / f"trial_{trial_index:04d}"
        return external_evaluate(
            self.descriptor, config, trial_dir, trial_index=trial_index, seed=eval_seed
        )
