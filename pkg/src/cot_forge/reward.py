"""Four-part reward for a generated response.

    composite = w_acc * accuracy + w_depth * depth + w_div * diversity - w_rep * repetition

``depth`` is a per-task trapezoid over the whitespace-token length,
``diversity`` the fraction of the five structural operations present in the
chain, and ``repetition`` the share of duplicated n-grams.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Mapping

from .chain import DEFAULT_LEXICON, MarkerLexicon, extract_label, parse_chain
from .core import (
    STRUCTURAL_KINDS,
    LabelSpace,
    MarkerKind,
    ReasoningChain,
    RewardVector,
    Sample,
    TaskKind,
    default_label_space,
)
from .errors import ConfigError, InvalidBand, LabelError

__all__ = [
    "DepthBand",
    "RewardConfig",
    "RewardVector",
    "Weights",
    "accuracy_reward",
    "composite_reward",
    "depth_reward",
    "diversity_reward",
    "load_reward_config",
    "repetition_penalty",
    "score_response",
    "score_text",
]

DepthBand = tuple[int, int, int, int]


@dataclass(frozen=True)
class Weights:
    accuracy: float = 1.0
    depth: float = 0.3
    diversity: float = 0.2
    repetition: float = 0.2

    def __post_init__(self):
        for name, value in self.as_dict().items():
            if not value >= 0:
                raise ConfigError(f"weight {name} must be >= 0, got {value}")

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.accuracy, self.depth, self.diversity, self.repetition)

    def as_dict(self) -> dict[str, float]:
        return {"accuracy": self.accuracy, "depth": self.depth, "diversity": self.diversity, "repetition": self.repetition}


DEFAULT_DEPTH_BANDS: dict[TaskKind, DepthBand] = {
    TaskKind.SENTIMENT: (5, 20, 120, 400),
    TaskKind.EMOTION: (5, 30, 160, 400),
    TaskKind.HUMOR: (10, 40, 220, 600),
    TaskKind.SARCASM: (10, 60, 300, 800),
}


def check_band(band: DepthBand) -> DepthBand:
    try:
        l_min, l_lo, l_hi, l_max = band
    except (TypeError, ValueError):
        raise InvalidBand(f"depth band must have four entries, got {band!r}") from None
    if not (l_min < l_lo <= l_hi < l_max):
        raise InvalidBand(f"depth band {band!r} violates L_min < L_lo <= L_hi < L_max")
    return (l_min, l_lo, l_hi, l_max)


@dataclass(frozen=True)
class RewardConfig:
    weights: Weights = field(default_factory=Weights)
    depth_bands: Mapping[TaskKind, DepthBand] = field(default_factory=lambda: dict(DEFAULT_DEPTH_BANDS))
    ngram_order: int = 3

    def __post_init__(self):
        bands = {TaskKind.parse(t): check_band(tuple(b)) for t, b in self.depth_bands.items()}
        missing = [t.value for t in TaskKind if t not in bands]
        if missing:
            raise ConfigError(f"depth_bands missing task(s): {', '.join(missing)}")
        object.__setattr__(self, "depth_bands", {t: bands[t] for t in TaskKind})
        if not isinstance(self.ngram_order, int) or self.ngram_order < 2:
            raise ConfigError(f"ngram_order must be an integer >= 2, got {self.ngram_order!r}")

    def band(self, task: TaskKind | str) -> DepthBand:
        return self.depth_bands[TaskKind.parse(task)]

    def to_dict(self) -> dict[str, Any]:
        return {
            "weights": self.weights.as_dict(),
            "depth_bands": {t.value: list(b) for t, b in self.depth_bands.items()},
            "ngram_order": self.ngram_order,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    def fingerprint(self) -> str:
        canonical = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()

    @classmethod
    def from_dict(cls, d: Mapping[str, Any], base: "RewardConfig | None" = None) -> "RewardConfig":
        """Build a config from a possibly partial mapping layered over ``base``."""
        base = base or cls()
        unknown = set(d) - {"weights", "depth_bands", "ngram_order"}
        if unknown:
            raise ConfigError(f"unknown reward config key(s): {', '.join(sorted(unknown))}")
        weights = base.weights
        if "weights" in d:
            weights = _parse_weights(d["weights"], weights)
        bands = dict(base.depth_bands)
        if "depth_bands" in d:
            if not isinstance(d["depth_bands"], Mapping):
                raise ConfigError("depth_bands must be an object keyed by task")
            for task, band in d["depth_bands"].items():
                try:
                    bands[TaskKind.parse(task)] = tuple(band)
                except (TypeError, ValueError) as exc:
                    raise ConfigError(f"depth_bands.{task}: {exc}") from None
        return cls(weights=weights, depth_bands=bands, ngram_order=d.get("ngram_order", base.ngram_order))

    def override(self, partial: Mapping[str, Any] | None) -> "RewardConfig":
        return self if not partial else RewardConfig.from_dict(partial, base=self)


def _parse_weights(raw: Any, base: Weights) -> Weights:
    if isinstance(raw, Mapping):
        unknown = set(raw) - set(base.as_dict())
        if unknown:
            raise ConfigError(f"unknown weight(s): {', '.join(sorted(unknown))}")
        try:
            return replace(base, **{k: float(v) for k, v in raw.items()})
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"invalid weights: {exc}") from None
    if isinstance(raw, (list, tuple)) and len(raw) == 4:
        return Weights(*(float(v) for v in raw))
    raise ConfigError("weights must be an object or a list of four numbers")


def load_reward_config(path: str | Path) -> RewardConfig:
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc.msg})") from None
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: reward config must be a JSON object")
    return RewardConfig.from_dict(data)


def accuracy_reward(predicted: int | None, gold: int) -> float:
    return 1.0 if predicted is not None and predicted == gold else 0.0


def depth_reward(length_tokens: int, band: DepthBand) -> float:
    """Trapezoid: 0 outside (L_min, L_max), 1 on [L_lo, L_hi], linear in between."""
    l_min, l_lo, l_hi, l_max = check_band(band)
    if length_tokens <= l_min or length_tokens >= l_max:
        return 0.0
    if length_tokens < l_lo:
        return (length_tokens - l_min) / (l_lo - l_min)
    if length_tokens <= l_hi:
        return 1.0
    return (l_max - length_tokens) / (l_max - l_hi)


def diversity_reward(chain: ReasoningChain) -> float:
    present = {s.kind for s in chain.segments if s.kind is not MarkerKind.PLAIN}
    return len(present) / len(STRUCTURAL_KINDS)


def repetition_penalty(text: str, n: int = 3) -> float:
    """``1 - distinct/total`` over whitespace-token n-grams; 0 when there are none."""
    if n < 2:
        raise ValueError("n-gram order must be >= 2")
    tokens = text.split()
    total = len(tokens) - n + 1
    if total <= 0:
        return 0.0
    distinct = len(set(zip(*(tokens[i:] for i in range(n)))))
    return 1.0 - distinct / total


def composite_reward(
    accuracy: float,
    depth: float,
    diversity: float,
    repetition: float,
    weights: Weights | tuple[float, float, float, float] = Weights(),
) -> float:
    w_acc, w_depth, w_div, w_rep = weights.as_tuple() if isinstance(weights, Weights) else weights
    return w_acc * accuracy + w_depth * depth + w_div * diversity - w_rep * repetition


@dataclass(frozen=True)
class Scored:
    """Everything computed while scoring one response."""

    rewards: RewardVector
    chain: ReasoningChain
    predicted_label: int | None


def score_text(
    task: TaskKind | str,
    gold_label: int,
    text: str,
    config: RewardConfig | None = None,
    lexicon: MarkerLexicon = DEFAULT_LEXICON,
    space: LabelSpace | None = None,
) -> Scored:
    config = config or RewardConfig()
    task = TaskKind.parse(task)
    space = space or default_label_space(task)
    space.check(gold_label)
    chain = parse_chain(text, lexicon)
    try:
        predicted: int | None = extract_label(text, space)
    except LabelError:
        predicted = None
    acc = accuracy_reward(predicted, gold_label)
    depth = depth_reward(chain.token_length, config.band(task))
    div = diversity_reward(chain)
    rep = repetition_penalty(text, config.ngram_order)
    composite = composite_reward(acc, depth, div, rep, config.weights)
    return Scored(RewardVector(acc, depth, div, rep, composite), chain, predicted)


def score_response(
    sample: Sample,
    text: str,
    config: RewardConfig | None = None,
    lexicon: MarkerLexicon = DEFAULT_LEXICON,
    space: LabelSpace | None = None,
) -> RewardVector:
    """Score ``text`` as an answer to ``sample``.

    An answer without a usable digit earns zero accuracy; the other three
    components are still computed. Empty text raises ``EmptyInput``.
    """
    return score_text(sample.task, sample.gold_label, text, config, lexicon, space).rewards
