"""Rejection-sampled SFT dataset construction and statistics.

Output layout (one JSON object per line):

* line 1: ``{"_meta": {...}}``, informational header with the generation
  settings and the SFT settings the data was produced for;
* then one record per retained candidate with the fields
  ``sample_id, task, prompt_text, gold_label, text, stratum, token_length, rewards``.

Per-prompt bookkeeping (candidates generated, retained, endpoint errors) goes to a
``<out>.progress.jsonl`` sidecar so the dataset itself stays clean for trainers.
The sidecar is what makes builds resumable and lets :func:`dataset_stats`
recover acceptance rates from disk.
"""

from __future__ import annotations

import enum
import json
import logging
import random
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import IO, Any, Iterable, Iterator, Mapping, Sequence

from .chain import DEFAULT_LEXICON, MarkerLexicon, extract_label, is_nonlinear
from .client import EndpointConfig, ModelClient
from .core import (
    GenerationConfig,
    LabelSpace,
    ReasoningChain,
    Sample,
    TaskKind,
    default_label_spaces,
    sample_from_dict,
)
from .errors import LabelError, ParseError, RecordError
from .reward import RewardConfig, score_text

log = logging.getLogger(__name__)

DEFAULT_LENGTH_THRESHOLD = 100
HISTOGRAM_BUCKET = 25
SFT_METADATA = {"max_token_length": 2048, "epochs": 3}


class Linearity(str, enum.Enum):
    LINEAR = "linear"
    NONLINEAR = "nonlinear"


class LengthClass(str, enum.Enum):
    SHORT = "short"
    LONG = "long"


@dataclass(frozen=True, order=True)
class StratumKey:
    linearity: Linearity
    length_class: LengthClass

    @property
    def label(self) -> str:
        return f"{self.linearity.value}/{self.length_class.value}"

    def to_dict(self) -> dict[str, str]:
        return {"linearity": self.linearity.value, "length_class": self.length_class.value}

    @classmethod
    def from_dict(cls, d: Mapping[str, str]) -> "StratumKey":
        return cls(Linearity(d["linearity"]), LengthClass(d["length_class"]))


ALL_STRATA: tuple[StratumKey, ...] = tuple(StratumKey(lin, lc) for lin in Linearity for lc in LengthClass)


def classify_stratum(chain: ReasoningChain, length_threshold: int = DEFAULT_LENGTH_THRESHOLD) -> StratumKey:
    if length_threshold <= 0:
        raise ValueError("length_threshold must be positive")
    linearity = Linearity.NONLINEAR if is_nonlinear(chain) else Linearity.LINEAR
    length = LengthClass.LONG if chain.token_length > length_threshold else LengthClass.SHORT
    return StratumKey(linearity, length)


def rejection_filter(sample: Sample, candidates: Sequence[str], space: LabelSpace) -> list[str]:
    """Keep the candidates whose extracted label equals the gold label."""
    kept = []
    for text in candidates:
        try:
            if extract_label(text, space) == sample.gold_label:
                kept.append(text)
        except LabelError:
            continue
    return kept


@dataclass
class TaskReport:
    prompts_seen: int = 0
    candidates_generated: int = 0
    candidates_retained: int = 0
    endpoint_errors: int = 0
    label_mismatches: int = 0
    strata: Counter = field(default_factory=lambda: Counter({s: 0 for s in ALL_STRATA}))
    length_histogram: Counter = field(default_factory=Counter)

    @property
    def acceptance_rate(self) -> float:
        return self.candidates_retained / self.candidates_generated if self.candidates_generated else 0.0

    def add_record(self, stratum: StratumKey, length: int) -> None:
        self.candidates_retained += 1
        self.strata[stratum] += 1
        self.length_histogram[(length // HISTOGRAM_BUCKET) * HISTOGRAM_BUCKET] += 1

    def to_dict(self) -> dict[str, Any]:
        return {
            "prompts_seen": self.prompts_seen,
            "candidates_generated": self.candidates_generated,
            "candidates_retained": self.candidates_retained,
            "acceptance_rate": self.acceptance_rate,
            "endpoint_errors": self.endpoint_errors,
            "label_mismatches": self.label_mismatches,
            "strata": {s.label: self.strata[s] for s in ALL_STRATA},
            "length_histogram": {str(k): v for k, v in sorted(self.length_histogram.items())},
        }


@dataclass
class BuildReport:
    tasks: dict[TaskKind, TaskReport] = field(default_factory=dict)

    def __getitem__(self, task: TaskKind | str) -> TaskReport:
        task = TaskKind.parse(task)
        if task not in self.tasks:
            self.tasks[task] = TaskReport()
        return self.tasks[task]

    def total(self, attr: str) -> int:
        return sum(getattr(r, attr) for r in self.tasks.values())

    def to_dict(self) -> dict[str, Any]:
        return {t.value: self.tasks[t].to_dict() for t in TaskKind if t in self.tasks}

    def render(self) -> str:
        if not self.tasks:
            return "(empty dataset)\n"
        lines = []
        header = f"{'task':<10} {'prompts':>8} {'generated':>10} {'retained':>9} {'accept':>7}  " + "  ".join(
            f"{s.label:>16}" for s in ALL_STRATA
        )
        lines.append(header)
        for task in TaskKind:
            if task not in self.tasks:
                continue
            r = self.tasks[task]
            lines.append(
                f"{task.value:<10} {r.prompts_seen:>8} {r.candidates_generated:>10} {r.candidates_retained:>9} "
                f"{r.acceptance_rate:>7.4f}  " + "  ".join(f"{r.strata[s]:>16}" for s in ALL_STRATA)
            )
        return "\n".join(lines) + "\n"


def progress_path(out_path: str | Path) -> Path:
    return Path(str(out_path) + ".progress.jsonl")


def iter_samples(path: str | Path) -> Iterator[Sample]:
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
                if not isinstance(obj, dict):
                    raise RecordError("record is not a JSON object")
                yield sample_from_dict(obj)
            except (json.JSONDecodeError, RecordError) as exc:
                raise ParseError(str(path), lineno, str(exc)) from None


def _processed_ids(out_path: Path) -> set[str]:
    done: set[str] = set()
    prog = progress_path(out_path)
    if prog.exists():
        for line in prog.read_text(encoding="utf-8").splitlines():
            if line.strip():
                entry = json.loads(line)
                if entry.get("status") == "done":
                    done.add(entry["sample_id"])
    if out_path.exists():
        for line in out_path.read_text(encoding="utf-8").splitlines():
            if line.strip():
                obj = json.loads(line)
                if "sample_id" in obj:
                    done.add(obj["sample_id"])
    return done


def load_transcript(path: str | Path) -> dict[str, list[str]]:
    out = {}
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if line.strip():
            entry = json.loads(line)
            out[entry["sample_id"]] = list(entry["candidates"])
    return out


def _dump(obj: Any) -> str:
    return json.dumps(obj, ensure_ascii=False) + "\n"


def build_sft_dataset(
    samples: Iterable[Sample],
    gen: GenerationConfig,
    ep: EndpointConfig | None,
    out_path: str | Path,
    *,
    config: RewardConfig | None = None,
    lexicon: MarkerLexicon = DEFAULT_LEXICON,
    spaces: Mapping[TaskKind, LabelSpace] | None = None,
    length_threshold: int = DEFAULT_LENGTH_THRESHOLD,
    prompt_template: str = "{prompt_text}",
    client: ModelClient | None = None,
    transcript: Mapping[str, Sequence[str]] | None = None,
    transcript_out: str | Path | None = None,
    balance: bool = False,
    seed: int | None = None,
) -> BuildReport:
    """Generate, filter, annotate and append SFT records for ``samples``.

    Candidates come from ``transcript`` when given (replay), otherwise from
    the endpoint. Samples already recorded in ``out_path`` are skipped. The
    returned report covers the samples processed by this call; with
    ``balance`` the file is downsampled afterwards and the report re-read from
    disk.
    """
    config = config or RewardConfig()
    spaces = dict(spaces or default_label_spaces())
    n = gen.candidates_per_prompt
    out_path = Path(out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    done = _processed_ids(out_path)
    report = BuildReport()

    own_client = False
    if transcript is None and client is None:
        if ep is None:
            raise ValueError("an endpoint or a transcript is required")
        client = ModelClient(ep)
        own_client = True
    chunk = client.ep.max_concurrency if client is not None else 64

    fresh = not out_path.exists() or out_path.stat().st_size == 0
    with open(out_path, "a", encoding="utf-8") as out, open(progress_path(out_path), "a", encoding="utf-8") as prog:
        tout: IO[str] | None = open(transcript_out, "a", encoding="utf-8") if transcript_out else None
        try:
            pending: list[Sample] = []

            def flush() -> None:
                nonlocal fresh
                if fresh:
                    out.write(_dump({"_meta": _header(gen, ep, config, length_threshold)}))
                    fresh = False
                results = _generate(pending, n, gen, client, transcript, prompt_template, spaces)
                for sample, outcomes in zip(pending, results):
                    _write_sample(sample, outcomes, out, prog, tout, report, config, lexicon, spaces, length_threshold)
                out.flush()
                prog.flush()
                pending.clear()

            seen_now: set[str] = set()
            for sample in samples:
                sample.validate(spaces[sample.task])
                if sample.id in done or sample.id in seen_now:
                    log.debug("skipping already processed sample %s", sample.id)
                    continue
                seen_now.add(sample.id)
                pending.append(sample)
                if len(pending) >= chunk:
                    flush()
            if pending:
                flush()
        finally:
            if tout is not None:
                tout.close()
            if own_client:
                client.close()

    if balance:
        balance_dataset(out_path, seed=seed)
        return dataset_stats(out_path, spaces=spaces)
    return report


def _header(gen: GenerationConfig, ep: EndpointConfig | None, config: RewardConfig, length_threshold: int) -> dict:
    return {
        "format": "cot_forge.sft/1",
        "model": ep.model_name if ep is not None else None,
        "generation": {
            "temperature": gen.temperature,
            "max_tokens": gen.max_tokens,
            "candidates_per_prompt": gen.candidates_per_prompt,
        },
        "sft": dict(SFT_METADATA),
        "length_threshold": length_threshold,
        "reward_config_fingerprint": config.fingerprint(),
    }


def _generate(
    batch: Sequence[Sample],
    n: int,
    gen: GenerationConfig,
    client: ModelClient | None,
    transcript: Mapping[str, Sequence[str]] | None,
    template: str,
    spaces: Mapping[TaskKind, LabelSpace],
) -> list[list[str | Exception]]:
    if transcript is not None:
        return [list(transcript.get(s.id, [])) for s in batch]
    prompts = []
    for s in batch:
        space = spaces[s.task]
        prompt = template.format(prompt_text=s.prompt_text, task=s.task.value, labels=_label_listing(space))
        prompts.extend([prompt] * n)
    flat = client.complete_batch(prompts, gen)
    return [[res for _, res in flat[i * n : (i + 1) * n]] for i in range(len(batch))]


def _label_listing(space: LabelSpace) -> str:
    return ", ".join(f"{i} = {name}" for i, name in enumerate(space.names))


def _write_sample(sample, outcomes, out, prog, tout, report, config, lexicon, spaces, length_threshold) -> None:
    texts = [o for o in outcomes if isinstance(o, str)]
    errors = len(outcomes) - len(texts)
    for o in outcomes:
        if isinstance(o, Exception):
            log.warning("sample %s: endpoint error: %s", sample.id, o)
    task_report = report[sample.task]
    task_report.endpoint_errors += errors
    if outcomes and not texts:
        prog.write(_dump({"sample_id": sample.id, "task": sample.task.value, "status": "failed", "endpoint_errors": errors}))
        return
    space = spaces[sample.task]
    retained = rejection_filter(sample, texts, space)
    if tout is not None:
        tout.write(_dump({"sample_id": sample.id, "candidates": texts}))
    for text in retained:
        scored = score_text(sample.task, sample.gold_label, text, config, lexicon, space)
        stratum = classify_stratum(scored.chain, length_threshold)
        out.write(
            _dump(
                {
                    "sample_id": sample.id,
                    "task": sample.task.value,
                    "prompt_text": sample.prompt_text,
                    "gold_label": sample.gold_label,
                    "text": text,
                    "stratum": stratum.to_dict(),
                    "token_length": scored.chain.token_length,
                    "rewards": scored.rewards.to_dict(),
                }
            )
        )
        task_report.add_record(stratum, scored.chain.token_length)
    task_report.prompts_seen += 1
    task_report.candidates_generated += len(texts)
    prog.write(
        _dump(
            {
                "sample_id": sample.id,
                "task": sample.task.value,
                "status": "done",
                "candidates_generated": len(texts),
                "candidates_retained": len(retained),
                "endpoint_errors": errors,
            }
        )
    )


_RECORD_FIELDS = ("sample_id", "task", "gold_label", "text", "stratum", "token_length")


def iter_records(path: str | Path) -> Iterator[tuple[int, dict]]:
    """Yield ``(line_number, record)`` for every data record, skipping the header."""
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ParseError(str(path), lineno, f"invalid JSON: {exc.msg}") from None
            if not isinstance(obj, dict):
                raise ParseError(str(path), lineno, "record is not a JSON object")
            if "_meta" in obj:
                continue
            missing = [k for k in _RECORD_FIELDS if k not in obj]
            if missing:
                raise ParseError(str(path), lineno, f"missing field(s): {', '.join(missing)}")
            yield lineno, obj


def dataset_stats(path: str | Path, spaces: Mapping[TaskKind, LabelSpace] | None = None) -> BuildReport:
    """Recompute the build report from a dataset file (and its sidecar, if present)."""
    spaces = dict(spaces or default_label_spaces())
    report = BuildReport()
    ids_per_task: dict[TaskKind, set[str]] = defaultdict(set)
    for lineno, rec in iter_records(path):
        try:
            task = TaskKind.parse(rec["task"])
            stratum = StratumKey.from_dict(rec["stratum"])
            length = int(rec["token_length"])
            gold = rec["gold_label"]
        except (KeyError, TypeError, ValueError) as exc:
            raise ParseError(str(path), lineno, f"invalid field: {exc}") from None
        tr = report[task]
        tr.add_record(stratum, length)
        ids_per_task[task].add(rec["sample_id"])
        try:
            if extract_label(rec["text"], spaces[task]) != gold:
                tr.label_mismatches += 1
        except LabelError:
            tr.label_mismatches += 1

    prog = progress_path(path)
    if prog.exists():
        for lineno, line in enumerate(prog.read_text(encoding="utf-8").splitlines(), 1):
            if not line.strip():
                continue
            try:
                entry = json.loads(line)
                tr = report[entry["task"]]
                tr.endpoint_errors += int(entry.get("endpoint_errors", 0))
                if entry["status"] == "done":
                    tr.prompts_seen += 1
                    tr.candidates_generated += int(entry["candidates_generated"])
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                raise ParseError(str(prog), lineno, f"invalid progress entry: {exc}") from None
    else:
        for task, ids in ids_per_task.items():
            report[task].prompts_seen = len(ids)
            report[task].candidates_generated = report[task].candidates_retained
    return report


def balance_dataset(path: str | Path, seed: int | None = None) -> dict[TaskKind, int]:
    """Downsample each task's strata to its smallest non-empty stratum, in place.

    Returns the number of records dropped per task. Record order is preserved.
    """
    path = Path(path)
    lines = path.read_text(encoding="utf-8").splitlines(keepends=True)
    by_bucket: dict[tuple[TaskKind, StratumKey], list[int]] = defaultdict(list)
    for idx, line in enumerate(lines):
        if not line.strip():
            continue
        obj = json.loads(line)
        if "_meta" in obj:
            continue
        by_bucket[(TaskKind.parse(obj["task"]), StratumKey.from_dict(obj["stratum"]))].append(idx)

    rng = random.Random(seed)
    drop: set[int] = set()
    dropped: dict[TaskKind, int] = {}
    for task in TaskKind:
        buckets = [by_bucket[(task, s)] for s in ALL_STRATA if by_bucket.get((task, s))]
        if not buckets:
            continue
        target = min(len(b) for b in buckets)
        count = 0
        for bucket in buckets:
            if len(bucket) > target:
                keep = set(rng.sample(bucket, target))
                removed = [i for i in bucket if i not in keep]
                drop.update(removed)
                count += len(removed)
        dropped[task] = count
    path.write_text("".join(line for i, line in enumerate(lines) if i not in drop), encoding="utf-8")
    return dropped
