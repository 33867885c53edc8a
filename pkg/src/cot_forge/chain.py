"""Reasoning-chain parsing.

A response is cut into sentence-level segments, each segment is tagged with
the structural operation whose trigger phrase occurs earliest in it, and the
final label is read off the last digit of the text.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path
from typing import Iterable, Mapping

from .core import STRUCTURAL_KINDS, LabelSpace, MarkerKind, ReasoningChain, Segment
from .errors import ConfigError, EmptyInput, LabelOutOfRange, NoLabelFound

__all__ = [
    "DEFAULT_LEXICON",
    "MarkerLexicon",
    "ReasoningChain",
    "Segment",
    "extract_label",
    "is_nonlinear",
    "load_lexicon",
    "parse_chain",
    "token_length",
]

NONLINEAR_KINDS = frozenset({MarkerKind.REFLECTION, MarkerKind.CONTRADICTION, MarkerKind.CORRECTION})

# A sentence ends at a run of . ! ? followed by whitespace (or end of text), or
# at a newline. Trailing whitespace belongs to the sentence it follows.
_BOUNDARY = re.compile(r"[.!?]+(?:\s+|$)|\n\s*")

_ANSWER = re.compile(
    r"""^(?:(?:so|thus|therefore|hence)\s*,?\s*)?
        (?:(?:the|my)\s+)?(?:final\s+)?
        (?:(?:answer|label|prediction|output|result)(?:\s+is)?\s*[:=\-]?\s*)?
        \(?[0-9]\)?
        (?:\s*\([\w\s\-]*\))?
        \s*[.!]?$""",
    re.IGNORECASE | re.VERBOSE,
)


def _normalize_phrase(phrase: str) -> str:
    return " ".join(phrase.lower().split())


@dataclass(frozen=True)
class MarkerLexicon:
    """Case-insensitive trigger phrases for each structural operation."""

    phrases: Mapping[MarkerKind, tuple[str, ...]]

    def __post_init__(self):
        cleaned: dict[MarkerKind, tuple[str, ...]] = {}
        owner: dict[str, MarkerKind] = {}
        for kind, plist in self.phrases.items():
            kind = MarkerKind(kind)
            if kind is MarkerKind.PLAIN:
                raise ConfigError("the plain kind cannot carry trigger phrases")
            out = []
            for raw in plist:
                phrase = _normalize_phrase(raw)
                if not phrase:
                    raise ConfigError(f"empty trigger phrase under {kind.value}")
                if phrase in owner and owner[phrase] is not kind:
                    raise ConfigError(f"phrase {phrase!r} listed under both {owner[phrase].value} and {kind.value}")
                if phrase not in owner:
                    owner[phrase] = kind
                    out.append(phrase)
            cleaned[kind] = tuple(out)
        for kind in STRUCTURAL_KINDS:
            cleaned.setdefault(kind, ())
        if "however" not in cleaned[MarkerKind.CONTRADICTION]:
            raise ConfigError('the contradiction lexicon must contain "however"')
        object.__setattr__(self, "phrases", {k: cleaned[k] for k in STRUCTURAL_KINDS})

    def kind_of(self, phrase: str) -> MarkerKind:
        phrase = _normalize_phrase(phrase)
        for kind, plist in self.phrases.items():
            if phrase in plist:
                return kind
        raise KeyError(phrase)

    def with_phrase(self, kind: MarkerKind, phrase: str) -> "MarkerLexicon":
        updated = dict(self.phrases)
        updated[kind] = updated[kind] + (phrase,)
        return MarkerLexicon(updated)

    @cached_property
    def _matcher(self) -> tuple[re.Pattern[str] | None, dict[str, tuple[MarkerKind, str]]]:
        entries = [(p, k) for k, plist in self.phrases.items() for p in plist]
        if not entries:
            return None, {}
        # Longest phrase first so that at a given position the longest trigger wins;
        # the regex engine already guarantees the earliest position wins.
        entries.sort(key=lambda e: (-len(e[0]), e[0]))
        groups = {}
        parts = []
        for i, (phrase, kind) in enumerate(entries):
            name = f"p{i}"
            groups[name] = (kind, phrase)
            body = r"\s+".join(re.escape(w) for w in phrase.split())
            parts.append(f"(?P<{name}>{body})")
        pattern = re.compile(r"(?<!\w)(?:" + "|".join(parts) + r")(?!\w)", re.IGNORECASE)
        return pattern, groups

    def classify(self, text: str) -> tuple[MarkerKind, str | None]:
        pattern, groups = self._matcher
        if pattern is None:
            return MarkerKind.PLAIN, None
        m = pattern.search(text)
        if m is None:
            return MarkerKind.PLAIN, None
        return groups[m.lastgroup]

    def to_dict(self) -> dict[str, list[str]]:
        return {k.value: list(v) for k, v in self.phrases.items()}

    @classmethod
    def from_dict(cls, d: Mapping[str, Iterable[str]]) -> "MarkerLexicon":
        phrases = {}
        for name, plist in d.items():
            try:
                kind = MarkerKind(str(name).lower())
            except ValueError:
                raise ConfigError(f"unknown marker kind {name!r} in lexicon") from None
            if isinstance(plist, str) or not all(isinstance(p, str) for p in plist):
                raise ConfigError(f"lexicon entry {name!r} must be a list of strings")
            phrases[kind] = tuple(plist)
        return cls(phrases)


DEFAULT_LEXICON = MarkerLexicon(
    {
        MarkerKind.DECOMPOSITION: ("first", "let's break", "consists of", "on the semantic level"),
        MarkerKind.REFLECTION: ("on reflection", "wait", "reconsider", "let me re-examine"),
        MarkerKind.VERIFICATION: ("check", "verify", "consistent with"),
        MarkerKind.CONTRADICTION: ("however", "but", "on the other hand"),
        MarkerKind.CORRECTION: ("actually", "correction", "instead"),
    }
)


def load_lexicon(path: str | Path) -> MarkerLexicon:
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc.msg})") from None
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: lexicon must be a JSON object")
    return MarkerLexicon.from_dict(data)


def token_length(text: str) -> int:
    """Whitespace-token count, the length unit used everywhere in cot_forge."""
    return len(text.split())


def _sentence_spans(text: str) -> list[tuple[int, int]]:
    spans = []
    start = 0
    for m in _BOUNDARY.finditer(text):
        # A newline only closes a sentence that already has content.
        content_end = m.end() if m.group()[0] in ".!?" else m.start()
        if not text[start:content_end].strip():
            continue
        spans.append((start, m.end()))
        start = m.end()
    if start < len(text):
        spans.append((start, len(text)))
    return spans


def is_answer_segment(segment_text: str) -> bool:
    return _ANSWER.match(segment_text.replace("*", "").strip()) is not None


def parse_chain(text: str, lexicon: MarkerLexicon = DEFAULT_LEXICON) -> ReasoningChain:
    """Split ``text`` into tagged segments plus an optional trailing answer span.

    The spans of the segments followed by the answer span tile ``text``
    exactly, with no gaps or overlaps.
    """
    if not text or not text.strip():
        raise EmptyInput("cannot parse an empty response")
    spans = _sentence_spans(text)
    answer_span = None
    if spans and is_answer_segment(text[spans[-1][0] : spans[-1][1]]):
        answer_span = spans.pop()
    segments = []
    for start, end in spans:
        kind, trigger = lexicon.classify(text[start:end])
        segments.append(Segment((start, end), kind, trigger))
    return ReasoningChain(tuple(segments), token_length(text), answer_span)


def extract_label(text: str, space: LabelSpace) -> int:
    """Map the last digit character of ``text`` to a label of ``space``."""
    for ch in reversed(text):
        if "0" <= ch <= "9":
            label = int(ch)
            break
    else:
        raise NoLabelFound("no digit in response")
    if label not in space:
        raise LabelOutOfRange(label, len(space))
    return label


def is_nonlinear(chain: ReasoningChain) -> bool:
    """True when some segment revisits earlier reasoning (reflection, contradiction, correction)."""
    return any(s.kind in NONLINEAR_KINDS for s in chain.segments)
