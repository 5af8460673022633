"""Search-space definitions and their unit-hypercube encoding.

A :class:`SearchSpace` is an ordered list of :class:`ParameterSpec` entries.
Configurations (plain ``{name: value}`` dicts) map bijectively, up to
discretisation, onto ``[0, 1]^d`` where the surrogate model and the
acquisition optimiser operate.
"""

import json
import math
from dataclasses import dataclass
from typing import Any, Iterable

import numpy as np

from boffin._validation import check_count, check_unit_coords

Configuration = dict[str, Any]

_KINDS = ("continuous", "integer", "categorical")
_SCALES = ("linear", "log")


def _round_half_up(value: float) -> int:
    return int(math.floor(value + 0.5))


@dataclass(frozen=True)
class ParameterSpec:
    """One tunable parameter: kind, bounds or choices, and encoding scale.

    Attributes:
        name: Identifier, unique within a search space.
        kind: "continuous", "integer", or "categorical".
        low: Inclusive lower bound (numeric kinds only).
        high: Inclusive upper bound (numeric kinds only).
        choices: Ordered distinct labels (categorical kind only).
        scale: "linear" or "log"; log requires low > 0.
    """

    name: str
    kind: str
    low: float | None = None
    high: float | None = None
    choices: tuple[str, ...] | None = None
    scale: str = "linear"

    def __post_init__(self) -> None:
        if not self.name or not isinstance(self.name, str):
            raise ValueError("parameter name must be a non-empty string")
        if self.kind not in _KINDS:
            raise ValueError(f"{self.name}: unknown kind {self.kind!r}")
        if self.scale not in _SCALES:
            raise ValueError(f"{self.name}: unknown scale {self.scale!r}")
        if self.kind == "categorical":
            if self.low is not None or self.high is not None:
                raise ValueError(f"{self.name}: categorical parameters take no bounds")
            if not self.choices:
                raise ValueError(f"{self.name}: categorical needs at least one choice")
            choices = tuple(self.choices)
            if len(set(choices)) != len(choices):
                raise ValueError(f"{self.name}: choices must be distinct")
            if self.scale == "log":
                raise ValueError(f"{self.name}: log scale requires a numeric kind")
            object.__setattr__(self, "choices", choices)
            return
        if self.choices is not None:
            raise ValueError(f"{self.name}: choices are only valid for categorical kind")
        if self.low is None or self.high is None:
            raise ValueError(f"{self.name}: numeric kinds need both low and high")
        low, high = float(self.low), float(self.high)
        if not (math.isfinite(low) and math.isfinite(high)):
            raise ValueError(f"{self.name}: bounds must be finite")
        if self.kind == "continuous" and not low < high:
            raise ValueError(f"{self.name}: continuous needs low < high, got [{low}, {high}]")
        if self.kind == "integer":
            if low != int(low) or high != int(high):
                raise ValueError(f"{self.name}: integer bounds must be whole numbers")
            if not low <= high:
                raise ValueError(f"{self.name}: integer needs low <= high, got [{low}, {high}]")
        if self.scale == "log" and low <= 0:
            raise ValueError(f"{self.name}: log scale requires low > 0")
        object.__setattr__(self, "low", low)
        object.__setattr__(self, "high", high)

    @property
    def span(self) -> float:
        """Width of the bound interval in encoding units (log units for log scale)."""
        if self.kind == "categorical":
            return 1.0
        if self.scale == "log":
            return math.log(self.high) - math.log(self.low)
        return self.high - self.low

    def validate_value(self, value) -> None:
        """Raise ValueError if ``value`` is not admissible for this parameter."""
        if self.kind == "categorical":
            if value not in self.choices:
                raise ValueError(f"{self.name}: {value!r} is not one of {list(self.choices)}")
            return
        if isinstance(value, bool) or not isinstance(value, (int, float, np.integer, np.floating)):
            raise ValueError(f"{self.name}: expected a number, got {type(value).__name__}")
        v = float(value)
        if self.kind == "integer" and v != int(v):
            raise ValueError(f"{self.name}: expected an integer, got {value!r}")
        if not self.low <= v <= self.high:
            raise ValueError(f"{self.name}: {value!r} outside bounds [{self.low}, {self.high}]")

    def encode_value(self, value) -> float:
        """Map an admissible value onto its [0, 1] coordinate."""
        self.validate_value(value)
        if self.kind == "categorical":
            index = self.choices.index(value)
            return (index + 0.5) / len(self.choices)
        v = float(value)
        if self.low == self.high:  # degenerate integer interval
            return 0.5
        if self.scale == "log":
            t = (math.log(v) - math.log(self.low)) / self.span
        else:
            t = (v - self.low) / self.span
        return min(max(t, 0.0), 1.0)

    def decode_coord(self, t: float):
        """Map a [0, 1] coordinate back to an admissible value."""
        if not 0.0 <= t <= 1.0:
            raise ValueError(f"{self.name}: coordinate {t} outside [0, 1]")
        if self.kind == "categorical":
            k = len(self.choices)
            return self.choices[min(int(t * k), k - 1)]
        if self.low == self.high:
            return int(self.low)
        if self.scale == "log":
            v = math.exp(math.log(self.low) + t * self.span)
        else:
            v = self.low + t * self.span
        if self.kind == "integer":
            return int(min(max(_round_half_up(v), int(self.low)), int(self.high)))
        return min(max(v, self.low), self.high)


@dataclass(frozen=True)
class SearchSpace:
    """Ordered collection of parameters defining the tunable space.

    Parameter order is fixed and defines the coordinate order of encoded
    vectors.
    """

    params: tuple[ParameterSpec, ...]

    def __post_init__(self) -> None:
        params = tuple(self.params)
        if not params:
            raise ValueError("search space needs at least one parameter")
        names = [p.name for p in params]
        if len(set(names)) != len(names):
            raise ValueError(f"duplicate parameter names in {names}")
        object.__setattr__(self, "params", params)

    @property
    def dimension(self) -> int:
        return len(self.params)

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(p.name for p in self.params)

    def __getitem__(self, name: str) -> ParameterSpec:
        for p in self.params:
            if p.name == name:
                return p
        raise KeyError(name)

    def validate(self, config: Configuration) -> None:
        """Raise ValueError unless ``config`` has exactly this space's parameters."""
        if set(config) != set(self.names):
            unknown = sorted(set(config) - set(self.names))
            missing = sorted(set(self.names) - set(config))
            raise ValueError(f"configuration mismatch: unknown={unknown}, missing={missing}")
        for p in self.params:
            p.validate_value(config[p.name])

    def encode(self, config: Configuration) -> np.ndarray:
        """Encode a configuration into unit-hypercube coordinates.

        Continuous and integer parameters interpolate linearly (or in log
        space); a categorical with k choices maps choice i to the bucket
        centre (i + 0.5) / k.

        Args:
            config: Mapping of parameter name to value, valid for this space.

        Returns:
            Float array of shape (dimension,) with entries in [0, 1].
        """
        self.validate(config)
        return np.array([p.encode_value(config[p.name]) for p in self.params])

    def decode(self, u) -> Configuration:
        """Decode unit-hypercube coordinates into a configuration.

        Inverse of :meth:`encode`; integer parameters round to the nearest
        integer after interpolation, categoricals take bucket floor(t * k)
        clamped to k - 1.

        Args:
            u: Coordinates of shape (dimension,), each in [0, 1].

        Returns:
            Configuration dict in parameter order.
        """
        arr = check_unit_coords(u, self.dimension)
        if arr.ndim != 1:
            raise ValueError(f"decode expects a single vector, got shape {arr.shape}")
        return {p.name: p.decode_coord(float(t)) for p, t in zip(self.params, arr)}

    def sample(self, rng_seed, n: int) -> list[Configuration]:
        """Draw configurations uniformly in encoded space.

        Args:
            rng_seed: Integer seed, or a numpy Generator to draw from.
            n: Number of configurations.

        Returns:
            List of n decoded configurations, deterministic for a fixed seed.
        """
        check_count(n, "n")
        if isinstance(rng_seed, np.random.Generator):
            rng = rng_seed
        else:
            rng = np.random.default_rng(rng_seed)
        return [self.decode(row) for row in rng.random((n, self.dimension))]

    def snap(self, u) -> np.ndarray:
        """Project coordinates onto the nearest discrete-feasible encoding.

        Equivalent to encode(decode(u)) applied row-wise, vectorised:
        continuous coordinates pass through unchanged, integer coordinates
        move to the encoding of their rounded value, categorical coordinates
        move to their bucket centre.

        Args:
            u: Array of shape (dimension,) or (n, dimension) in [0, 1].

        Returns:
            Snapped array of the same shape.
        """
        arr = check_unit_coords(u, self.dimension)
        single = arr.ndim == 1
        out = np.array(np.atleast_2d(arr), dtype=float)
        for j, p in enumerate(self.params):
            col = out[:, j]
            if p.kind == "categorical":
                k = len(p.choices)
                idx = np.minimum((col * k).astype(int), k - 1)
                out[:, j] = (idx + 0.5) / k
            elif p.kind == "integer":
                if p.low == p.high:
                    out[:, j] = 0.5
                    continue
                if p.scale == "log":
                    v = np.exp(math.log(p.low) + col * p.span)
                else:
                    v = p.low + col * p.span
                v = np.clip(np.floor(v + 0.5), p.low, p.high)
                if p.scale == "log":
                    out[:, j] = (np.log(v) - math.log(p.low)) / p.span
                else:
                    out[:, j] = (v - p.low) / p.span
        return out[0] if single else out

    def transform(self, configs: Iterable[Configuration]) -> np.ndarray:
        """Encode a sequence of configurations into an (n, dimension) array."""
        rows = [self.encode(c) for c in configs]
        if not rows:
            return np.empty((0, self.dimension))
        return np.vstack(rows)

    def inverse_transform(self, U) -> list[Configuration]:
        """Decode an (n, dimension) array into a list of configurations."""
        arr = check_unit_coords(U, self.dimension)
        return [self.decode(row) for row in np.atleast_2d(arr)]

    def to_dict(self) -> dict:
        """Plain-dict form with the documented key order per parameter."""
        params = []
        for p in self.params:
            entry = {
                "name": p.name,
                "kind": p.kind,
                "low": None if p.low is None else (int(p.low) if p.kind == "integer" else p.low),
                "high": None if p.high is None else (int(p.high) if p.kind == "integer" else p.high),
                "choices": None if p.choices is None else list(p.choices),
                "scale": p.scale,
            }
            params.append(entry)
        return {"params": params}

    @classmethod
    def from_dict(cls, doc: dict) -> "SearchSpace":
        """Build a space from the dict form produced by :meth:`to_dict`."""
        if not isinstance(doc, dict) or "params" not in doc:
            raise ValueError("space document must be an object with a 'params' list")
        specs = []
        for entry in doc["params"]:
            choices = entry.get("choices")
            specs.append(
                ParameterSpec(
                    name=entry["name"],
                    kind=entry["kind"],
                    low=entry.get("low"),
                    high=entry.get("high"),
                    choices=None if choices is None else tuple(choices),
                    scale=entry.get("scale") or "linear",
                )
            )
        return cls(params=tuple(specs))

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    @classmethod
    def from_json(cls, text: str) -> "SearchSpace":
        return cls.from_dict(json.loads(text))


def boffin_preset(max_epoch: int = 100) -> SearchSpace:
    """Nine-parameter fine-tuning strategy space with runnable default bounds.

    Covers the optimiser settings (learning rate, batch size, decay factor,
    gradient-clipping threshold), the regularisers (dropout and the two
    zoneout rates), the rehearsal mixing ratio, and the base-model epoch to
    fine-tune from. Bounds are defaults chosen for practicality, not part of
    the method; override them via a space JSON file. Kind assignments are an
    inference: batch size and epoch are naturally integer, the rest
    continuous.

    Args:
        max_epoch: Upper bound of the base_epoch parameter.

    Returns:
        The nine-dimensional search space.
    """
    check_count(max_epoch, "max_epoch", minimum=1)
    return SearchSpace(
        params=(
            ParameterSpec("learning_rate", "continuous", 1e-6, 1e-2, scale="log"),
            ParameterSpec("batch_size", "integer", 8, 64),
            ParameterSpec("decay_factor", "continuous", 0.5, 1.0),
            ParameterSpec("grad_clip_threshold", "continuous", 0.1, 10.0, scale="log"),
            ParameterSpec("dropout", "continuous", 0.0, 0.9),
            ParameterSpec("zoneout_cell", "continuous", 0.0, 0.9),
            ParameterSpec("zoneout_output", "continuous", 0.0, 0.9),
            ParameterSpec("mixing_ratio", "continuous", 0.0, 1.0),
            ParameterSpec("base_epoch", "integer", 1, max_epoch),
        )
    )
