"""Shared domain types, label spaces and line-record serialization.

Everything here is a frozen dataclass so values can be shared freely between
threads. Records are one JSON object per line; unknown fields are ignored on
read, missing required fields raise :class:`RecordError`.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field
from typing import Any, Mapping, Sequence

from .errors import LabelOutOfRange, RecordError

MAX_LABELS = 10


class TaskKind(str, enum.Enum):
    SENTIMENT = "sentiment"
    EMOTION = "emotion"
    HUMOR = "humor"
    SARCASM = "sarcasm"

    @classmethod
    def parse(cls, value: "str | TaskKind") -> "TaskKind":
        if isinstance(value, TaskKind):
            return value
        try:
            return cls(str(value).strip().lower())
        except ValueError:
            names = ", ".join(t.value for t in cls)
            raise ValueError(f"unknown task {value!r} (expected one of {names})") from None


class MarkerKind(str, enum.Enum):
    DECOMPOSITION = "decomposition"
    REFLECTION = "reflection"
    VERIFICATION = "verification"
    CONTRADICTION = "contradiction"
    CORRECTION = "correction"
    PLAIN = "plain"


#: The five structural operations, i.e. every kind except ``PLAIN``.
STRUCTURAL_KINDS: tuple[MarkerKind, ...] = tuple(k for k in MarkerKind if k is not MarkerKind.PLAIN)


@dataclass(frozen=True)
class LabelSpace:
    """Contiguous integer labels ``0..K-1`` with one display name each."""

    task: TaskKind
    names: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "task", TaskKind.parse(self.task))
        object.__setattr__(self, "names", tuple(self.names))
        if not 2 <= len(self.names) <= MAX_LABELS:
            raise ValueError(f"label space needs 2..{MAX_LABELS} labels, got {len(self.names)}")
        if any(not isinstance(n, str) or not n.strip() for n in self.names):
            raise ValueError("label names must be non-empty strings")
        if len(set(self.names)) != len(self.names):
            raise ValueError("label names must be unique")

    @property
    def labels(self) -> tuple[int, ...]:
        return tuple(range(len(self.names)))

    def __len__(self) -> int:
        return len(self.names)

    def __contains__(self, label: object) -> bool:
        return isinstance(label, int) and not isinstance(label, bool) and 0 <= label < len(self.names)

    def check(self, label: int) -> int:
        if label not in self:
            raise LabelOutOfRange(label, len(self))
        return label

    def name(self, label: int) -> str:
        return self.names[self.check(label)]


# MELD's seven emotion classes, in the index order used by the MELD baseline code.
_DEFAULT_NAMES: dict[TaskKind, tuple[str, ...]] = {
    TaskKind.SENTIMENT: ("negative", "positive"),
    TaskKind.EMOTION: ("neutral", "surprise", "fear", "sadness", "joy", "disgust", "anger"),
    TaskKind.HUMOR: ("non-humorous", "humorous"),
    TaskKind.SARCASM: ("non-sarcastic", "sarcastic"),
}


def default_label_space(task: TaskKind | str) -> LabelSpace:
    task = TaskKind.parse(task)
    return LabelSpace(task, _DEFAULT_NAMES[task])


def default_label_spaces() -> dict[TaskKind, LabelSpace]:
    return {t: default_label_space(t) for t in TaskKind}


@dataclass(frozen=True)
class GenerationConfig:
    temperature: float = 0.0
    max_tokens: int = 10
    candidates_per_prompt: int = 1

    def __post_init__(self):
        if self.temperature < 0:
            raise ValueError("temperature must be >= 0")
        if self.max_tokens < 1:
            raise ValueError("max_tokens must be positive")
        if self.candidates_per_prompt < 1:
            raise ValueError("candidates_per_prompt must be positive")

    @classmethod
    def evaluation(cls) -> "GenerationConfig":
        """Greedy decoding capped at 10 tokens."""
        return cls(temperature=0.0, max_tokens=10, candidates_per_prompt=1)

    @classmethod
    def dataset_building(cls, n: int, temperature: float = 0.7, max_tokens: int = 2048) -> "GenerationConfig":
        return cls(temperature=temperature, max_tokens=max_tokens, candidates_per_prompt=n)


@dataclass(frozen=True)
class Segment:
    span: tuple[int, int]
    kind: MarkerKind = MarkerKind.PLAIN
    trigger: str | None = None

    def __post_init__(self):
        start, end = self.span
        if end <= start:
            raise ValueError(f"empty segment span {self.span}")
        if (self.kind is MarkerKind.PLAIN) != (self.trigger is None):
            raise ValueError("a segment has a trigger exactly when its kind is not plain")

    def to_dict(self) -> dict[str, Any]:
        return {"span": list(self.span), "kind": self.kind.value, "trigger": self.trigger}

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "Segment":
        start, end = d["span"]
        return cls((int(start), int(end)), MarkerKind(d["kind"]), d.get("trigger"))


@dataclass(frozen=True)
class ReasoningChain:
    segments: tuple[Segment, ...]
    token_length: int
    answer_span: tuple[int, int] | None = None

    @property
    def kinds(self) -> list[MarkerKind]:
        return [s.kind for s in self.segments]

    def to_dict(self) -> dict[str, Any]:
        return {
            "segments": [s.to_dict() for s in self.segments],
            "token_length": self.token_length,
            "answer_span": list(self.answer_span) if self.answer_span is not None else None,
        }

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "ReasoningChain":
        span = d.get("answer_span")
        return cls(
            segments=tuple(Segment.from_dict(s) for s in d["segments"]),
            token_length=int(d["token_length"]),
            answer_span=(int(span[0]), int(span[1])) if span is not None else None,
        )


@dataclass(frozen=True)
class RewardVector:
    accuracy: float
    depth: float
    diversity: float
    repetition_penalty: float
    composite: float

    def components(self) -> tuple[float, float, float, float]:
        return (self.accuracy, self.depth, self.diversity, self.repetition_penalty)

    def to_dict(self) -> dict[str, float]:
        return {
            "accuracy": self.accuracy,
            "depth": self.depth,
            "diversity": self.diversity,
            "repetition_penalty": self.repetition_penalty,
            "composite": self.composite,
        }

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "RewardVector":
        return cls(**{k: float(d[k]) for k in ("accuracy", "depth", "diversity", "repetition_penalty", "composite")})


@dataclass(frozen=True)
class Sample:
    id: str
    task: TaskKind
    prompt_text: str
    gold_label: int

    def __post_init__(self):
        object.__setattr__(self, "task", TaskKind.parse(self.task))
        if not isinstance(self.id, str) or not self.id:
            raise ValueError("sample id must be a non-empty string")
        if not self.prompt_text or not self.prompt_text.strip():
            raise ValueError(f"sample {self.id!r}: prompt_text is empty")
        if not isinstance(self.gold_label, int) or isinstance(self.gold_label, bool):
            raise ValueError(f"sample {self.id!r}: gold_label must be an integer")

    def validate(self, space: LabelSpace) -> "Sample":
        if space.task is not self.task:
            raise ValueError(f"sample {self.id!r} is {self.task.value}, label space is {space.task.value}")
        space.check(self.gold_label)
        return self

    def to_dict(self) -> dict[str, Any]:
        return {"id": self.id, "task": self.task.value, "prompt_text": self.prompt_text, "gold_label": self.gold_label}


@dataclass(frozen=True)
class CandidateResponse:
    sample_id: str
    text: str
    chain: ReasoningChain | None = None
    predicted_label: int | None = None
    rewards: RewardVector | None = None

    def to_dict(self) -> dict[str, Any]:
        d: dict[str, Any] = {"sample_id": self.sample_id, "text": self.text}
        if self.chain is not None:
            d["chain"] = self.chain.to_dict()
        if self.predicted_label is not None:
            d["predicted_label"] = self.predicted_label
        if self.rewards is not None:
            d["rewards"] = self.rewards.to_dict()
        return d


def _require(d: Mapping[str, Any], keys: Sequence[str], what: str) -> None:
    missing = [k for k in keys if k not in d]
    if missing:
        raise RecordError(f"{what} record missing field(s): {', '.join(missing)}")


def _load_object(line: str) -> dict[str, Any]:
    try:
        obj = json.loads(line)
    except json.JSONDecodeError as exc:
        raise RecordError(f"not valid JSON: {exc.msg}") from None
    if not isinstance(obj, dict):
        raise RecordError("record is not a JSON object")
    return obj


def sample_from_dict(d: Mapping[str, Any]) -> Sample:
    _require(d, ("id", "task", "prompt_text", "gold_label"), "sample")
    try:
        return Sample(id=d["id"], task=d["task"], prompt_text=d["prompt_text"], gold_label=d["gold_label"])
    except ValueError as exc:
        raise RecordError(str(exc)) from None


def serialize_sample(sample: Sample) -> str:
    return json.dumps(sample.to_dict(), ensure_ascii=False)


def deserialize_sample(line: str) -> Sample:
    return sample_from_dict(_load_object(line))


def candidate_from_dict(d: Mapping[str, Any]) -> CandidateResponse:
    _require(d, ("sample_id", "text"), "candidate")
    try:
        return CandidateResponse(
            sample_id=d["sample_id"],
            text=d["text"],
            chain=ReasoningChain.from_dict(d["chain"]) if d.get("chain") is not None else None,
            predicted_label=d.get("predicted_label"),
            rewards=RewardVector.from_dict(d["rewards"]) if d.get("rewards") is not None else None,
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise RecordError(f"invalid candidate record: {exc}") from None


def serialize_candidate(candidate: CandidateResponse) -> str:
    return json.dumps(candidate.to_dict(), ensure_ascii=False)


def deserialize_candidate(line: str) -> CandidateResponse:
    return candidate_from_dict(_load_object(line))
