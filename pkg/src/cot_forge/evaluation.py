"""Fixed-protocol evaluation: greedy decoding, 10-token cap, digit-mapped labels.

The confusion matrix has one row per gold class and one column per predicted
class plus a final overflow column for outputs with no usable label. Overflow
entries count as errors.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .chain import extract_label
from .client import EndpointConfig, ModelClient
from .core import GenerationConfig, LabelSpace, Sample, TaskKind, default_label_space
from .errors import EmptyEval, LabelError, ProtocolViolation

log = logging.getLogger(__name__)

PROTOCOL = GenerationConfig.evaluation()


@dataclass
class EvalResult:
    task: TaskKind
    n: int
    n_unparseable: int
    confusion: np.ndarray
    accuracy: float
    macro_f1: float
    weighted_f1: float
    endpoint: str = ""

    def to_dict(self) -> dict:
        return {
            "task": self.task.value,
            "endpoint": self.endpoint,
            "n": self.n,
            "n_unparseable": self.n_unparseable,
            "accuracy": self.accuracy,
            "macro_f1": self.macro_f1,
            "weighted_f1": self.weighted_f1,
            "confusion": self.confusion.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "EvalResult":
        return cls(
            task=TaskKind.parse(d["task"]),
            n=int(d["n"]),
            n_unparseable=int(d["n_unparseable"]),
            confusion=np.asarray(d["confusion"], dtype=np.int64),
            accuracy=float(d["accuracy"]),
            macro_f1=float(d["macro_f1"]),
            weighted_f1=float(d["weighted_f1"]),
            endpoint=d.get("endpoint", ""),
        )


def confusion_matrix(golds: Sequence[int], preds: Sequence[int | None], num_classes: int) -> np.ndarray:
    """K x (K+1) count matrix; ``None`` predictions land in the last column."""
    if len(golds) != len(preds):
        raise ValueError("golds and preds differ in length")
    cm = np.zeros((num_classes, num_classes + 1), dtype=np.int64)
    for g, p in zip(golds, preds):
        cm[g, num_classes if p is None else p] += 1
    return cm


def _split(confusion) -> tuple[np.ndarray, int]:
    cm = np.asarray(confusion, dtype=np.int64)
    if cm.ndim != 2 or cm.shape[1] not in (cm.shape[0], cm.shape[0] + 1):
        raise ValueError(f"expected a K x K or K x (K+1) matrix, got shape {cm.shape}")
    if (cm < 0).any():
        raise ValueError("confusion matrix has negative entries")
    n = int(cm.sum())
    if n == 0:
        raise EmptyEval("no evaluated samples")
    return cm, n


def per_class_f1(confusion) -> np.ndarray:
    cm, _ = _split(confusion)
    k = cm.shape[0]
    tp = np.diag(cm[:, :k]).astype(float)
    predicted = cm[:, :k].sum(axis=0).astype(float)
    support = cm.sum(axis=1).astype(float)
    precision = np.divide(tp, predicted, out=np.zeros(k), where=predicted > 0)
    recall = np.divide(tp, support, out=np.zeros(k), where=support > 0)
    denom = precision + recall
    return np.divide(2 * precision * recall, denom, out=np.zeros(k), where=denom > 0)


def accuracy(confusion) -> float:
    cm, n = _split(confusion)
    k = cm.shape[0]
    return float(np.trace(cm[:, :k])) / n


def macro_f1(confusion) -> float:
    return float(np.mean(per_class_f1(confusion)))


def weighted_f1(confusion) -> float:
    cm, n = _split(confusion)
    weights = cm.sum(axis=1) / n
    return float(np.sum(per_class_f1(cm) * weights))


def score_outputs(
    golds: Sequence[int], outputs: Sequence[str | None], space: LabelSpace, endpoint: str = ""
) -> EvalResult:
    """Digit-map raw model outputs and compute every metric (``None`` = failed request)."""
    preds: list[int | None] = []
    for text in outputs:
        try:
            preds.append(extract_label(text, space) if text is not None else None)
        except LabelError:
            preds.append(None)
    for g in golds:
        space.check(g)
    cm = confusion_matrix(golds, preds, len(space))
    return EvalResult(
        task=space.task,
        n=len(golds),
        n_unparseable=sum(p is None for p in preds),
        confusion=cm,
        accuracy=accuracy(cm),
        macro_f1=macro_f1(cm),
        weighted_f1=weighted_f1(cm),
        endpoint=endpoint,
    )


def check_protocol(gen: GenerationConfig, override_protocol: bool = False) -> None:
    if override_protocol:
        return
    if gen.temperature != PROTOCOL.temperature or gen.max_tokens != PROTOCOL.max_tokens:
        raise ProtocolViolation(
            f"evaluation requires temperature={PROTOCOL.temperature} and max_tokens={PROTOCOL.max_tokens} "
            f"(got {gen.temperature}, {gen.max_tokens}); pass override_protocol to deviate"
        )


def evaluate(
    test_set: Iterable[Sample],
    gen: GenerationConfig,
    ep: EndpointConfig,
    *,
    space: LabelSpace | None = None,
    override_protocol: bool = False,
    client: ModelClient | None = None,
) -> EvalResult:
    check_protocol(gen, override_protocol)
    samples = list(test_set)
    if not samples:
        raise EmptyEval("empty test set")
    task = samples[0].task
    if any(s.task is not task for s in samples):
        raise ValueError("test set mixes tasks; evaluate one task at a time")
    space = space or default_label_space(task)
    for s in samples:
        s.validate(space)

    own = client is None
    client = client or ModelClient(ep)
    try:
        results = client.complete_batch([s.prompt_text for s in samples], gen)
    finally:
        if own:
            client.close()
    outputs: list[str | None] = []
    for i, res in results:
        if isinstance(res, Exception):
            log.warning("sample %s: %s", samples[i].id, res)
            outputs.append(None)
        else:
            outputs.append(res)
    return score_outputs([s.gold_label for s in samples], outputs, space, endpoint=ep.name)


_COLUMNS = ("Task", "Endpoint", "Acc", "Macro-f1", "Weighted-f1")


def _ordered(results: Iterable[EvalResult]) -> list[EvalResult]:
    order = {t: i for i, t in enumerate(TaskKind)}
    return sorted(results, key=lambda r: (order[r.task], r.endpoint))


def render_report(results: Iterable[EvalResult]) -> str:
    """Aligned text table, one row per (task, endpoint)."""
    rows = [
        (r.task.value, r.endpoint, f"{r.accuracy:.4f}", f"{r.macro_f1:.4f}", f"{r.weighted_f1:.4f}")
        for r in _ordered(results)
    ]
    widths = [max(len(c), *(len(row[i]) for row in rows)) if rows else len(c) for i, c in enumerate(_COLUMNS)]

    def fmt(cells):
        left = [cells[0].ljust(widths[0]), cells[1].ljust(widths[1])]
        right = [c.rjust(w) for c, w in zip(cells[2:], widths[2:])]
        return "  ".join(left + right).rstrip()

    lines = [fmt(_COLUMNS), "  ".join("-" * w for w in widths)]
    lines.extend(fmt(row) for row in rows)
    return "\n".join(lines) + "\n"


def report_records(results: Iterable[EvalResult]) -> list[dict]:
    return [r.to_dict() for r in _ordered(results)]


def render_report_jsonl(results: Iterable[EvalResult]) -> str:
    return "".join(json.dumps(rec) + "\n" for rec in report_records(results))


def load_report_records(path) -> list[EvalResult]:
    with open(path, encoding="utf-8") as fh:
        return [EvalResult.from_dict(json.loads(line)) for line in fh if line.strip()]
