"""``cot-forge`` command line.

Exit codes: 0 success, 1 usage error, 2 runtime error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Any, Sequence

from .chain import DEFAULT_LEXICON, MarkerLexicon, load_lexicon
from .client import EndpointConfig
from .config import LOG_LEVELS, GlobalConfig
from .core import GenerationConfig, TaskKind
from .dataset import (
    DEFAULT_LENGTH_THRESHOLD,
    build_sft_dataset,
    dataset_stats,
    iter_samples,
    load_transcript,
)
from .errors import CotForgeError
from .evaluation import evaluate, render_report, render_report_jsonl
from .reward import RewardConfig, load_reward_config
from .service import score_item, serve

log = logging.getLogger("cot_forge")

EXIT_OK, EXIT_USAGE, EXIT_RUNTIME = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _global_flags(suppress: bool) -> argparse.ArgumentParser:
    default = argparse.SUPPRESS if suppress else None
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--config", metavar="FILE", default=default, help="global JSON config file")
    p.add_argument("--log-level", choices=LOG_LEVELS, type=str.upper, default=default, help="logging verbosity")
    p.add_argument("--seed", type=int, default=default, help="seed for --balance downsampling")
    return p


def _reward_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--reward-config", metavar="FILE", help="reward config JSON (see print-default-config)")
    p.add_argument("--lexicon", metavar="FILE", help="marker lexicon JSON")


def _endpoint_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--endpoint", metavar="URL", help="chat-completions base URL, e.g. http://127.0.0.1:8000/v1")
    p.add_argument("--model", metavar="NAME", help="model name sent with every request")
    p.add_argument("--max-concurrency", type=int, help="maximum in-flight requests")
    p.add_argument("--max-retries", type=int, help="retries for 429/5xx/timeouts")
    p.add_argument("--timeout", type=float, help="per-request timeout in seconds")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="cot-forge", description="Build, score and evaluate chain-of-thought emotion-understanding data.", parents=[_global_flags(False)])
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")
    common = [_global_flags(True)]

    b = sub.add_parser("build-dataset", parents=common, help="rejection-sample an SFT dataset")
    b.add_argument("--task", required=True, choices=[t.value for t in TaskKind])
    b.add_argument("--in", dest="input", required=True, metavar="SAMPLES", help="sample records (JSONL)")
    b.add_argument("--out", required=True, metavar="FILE", help="output dataset (JSONL, appended)")
    b.add_argument("--n", type=int, required=True, help="candidates per prompt")
    _endpoint_flags(b)
    _reward_flags(b)
    b.add_argument("--balance", action="store_true", help="downsample strata to the smallest non-empty one")
    b.add_argument("--length-threshold", type=int, default=DEFAULT_LENGTH_THRESHOLD, help="tokens above which a chain is long")
    b.add_argument("--temperature", type=float, default=0.7, help="sampling temperature for candidates")
    b.add_argument("--max-tokens", type=int, default=2048, help="completion cap for candidates")
    b.add_argument("--prompt-template", metavar="FILE", help="template with {prompt_text}, {task}, {labels}")
    b.add_argument("--transcript-out", metavar="FILE", help="record raw candidates for later replay")
    b.add_argument("--replay", metavar="TRANSCRIPT", help="take candidates from a recorded transcript")

    s = sub.add_parser("score", parents=common, help="score candidate records")
    s.add_argument("--in", dest="input", default="-", metavar="FILE", help="candidate records (JSONL), '-' for stdin")
    s.add_argument("--out", default="-", metavar="FILE", help="scored records (JSONL), '-' for stdout")
    s.add_argument("--samples", metavar="FILE", help="sample records providing task/gold_label by sample_id")
    _reward_flags(s)
    s.add_argument("--length-threshold", type=int, default=DEFAULT_LENGTH_THRESHOLD)

    v = sub.add_parser("serve", parents=common, help="run the HTTP scoring service")
    v.add_argument("--bind", default="127.0.0.1:8750", metavar="HOST:PORT")
    _reward_flags(v)
    v.add_argument("--length-threshold", type=int, default=DEFAULT_LENGTH_THRESHOLD)

    e = sub.add_parser("eval", parents=common, help="evaluate an endpoint under the fixed protocol")
    e.add_argument("--task", required=True, choices=[t.value for t in TaskKind])
    e.add_argument("--in", dest="input", required=True, metavar="SAMPLES", help="test sample records (JSONL)")
    _endpoint_flags(e)
    e.add_argument("--override-protocol", action="store_true", help="allow non-default temperature/max-tokens")
    e.add_argument("--temperature", type=float, default=0.0)
    e.add_argument("--max-tokens", type=int, default=10)
    e.add_argument("--out", metavar="REPORT", help="text report path; records go next to it as .jsonl")

    t = sub.add_parser("stats", parents=common, help="recompute statistics of a built dataset")
    t.add_argument("path", metavar="FILE")
    t.add_argument("--json", action="store_true", help="emit JSON instead of a table")

    d = sub.add_parser("print-default-config", parents=common, help="print the built-in reward config")
    d.add_argument("--lexicon", action="store_true", help="print the default marker lexicon instead")
    return parser


def _pick(flag: Any, configured: Any, default: Any = None) -> Any:
    """Command-line flag, then config file, then built-in default."""
    if flag is not None:
        return flag
    if configured is not None:
        return configured
    return default


def _load_reward(args, gc: GlobalConfig) -> RewardConfig:
    path = _pick(args.reward_config, gc.reward_config)
    return load_reward_config(path) if path else RewardConfig()


def _load_lexicon(args, gc: GlobalConfig) -> MarkerLexicon:
    path = _pick(args.lexicon, gc.lexicon)
    return load_lexicon(path) if path else DEFAULT_LEXICON


def _endpoint(args, gc: GlobalConfig) -> EndpointConfig:
    conf = gc.endpoint
    base_url = _pick(args.endpoint, conf.get("base_url"))
    model = _pick(args.model, conf.get("model_name"))
    if not base_url or not model:
        raise UsageError("an endpoint URL (--endpoint) and model name (--model) are required")
    kwargs = {
        "api_key": conf.get("api_key"),
        "timeout": _pick(args.timeout, conf.get("timeout"), 60.0),
        "max_retries": _pick(args.max_retries, conf.get("max_retries"), 3),
        "max_concurrency": _pick(args.max_concurrency, conf.get("max_concurrency"), 4),
        "min_request_interval": conf.get("min_request_interval", 0.0),
    }
    return EndpointConfig(base_url, model, **kwargs)


def _samples_for(path: str, task: TaskKind):
    for sample in iter_samples(path):
        if sample.task is not task:
            raise CotForgeError(f"sample {sample.id!r} is a {sample.task.value} sample, expected {task.value}")
        yield sample


def cmd_build(args, gc: GlobalConfig) -> int:
    task = TaskKind.parse(args.task)
    if args.n < 1:
        raise UsageError("--n must be >= 1")
    if args.length_threshold < 1:
        raise UsageError("--length-threshold must be >= 1")
    gen = GenerationConfig.dataset_building(args.n, temperature=args.temperature, max_tokens=args.max_tokens)
    transcript = load_transcript(args.replay) if args.replay else None
    if transcript is None or args.endpoint or gc.endpoint.get("base_url"):
        ep = _endpoint(args, gc)
    else:
        ep = None
    template = Path(args.prompt_template).read_text(encoding="utf-8") if args.prompt_template else "{prompt_text}"
    report = build_sft_dataset(
        _samples_for(args.input, task),
        gen,
        ep,
        args.out,
        config=_load_reward(args, gc),
        lexicon=_load_lexicon(args, gc),
        spaces=gc.label_spaces,
        length_threshold=args.length_threshold,
        prompt_template=template,
        transcript=transcript,
        transcript_out=args.transcript_out,
        balance=args.balance,
        seed=getattr(args, "seed", None),
    )
    sys.stdout.write(report.render())
    return EXIT_OK


def _read_lines(path: str):
    if path == "-":
        yield from sys.stdin
    else:
        with open(path, encoding="utf-8") as fh:
            yield from fh


def cmd_score(args, gc: GlobalConfig) -> int:
    config = _load_reward(args, gc)
    lexicon = _load_lexicon(args, gc)
    lookup = {s.id: s for s in iter_samples(args.samples)} if args.samples else {}
    out = sys.stdout if args.out == "-" else open(args.out, "w", encoding="utf-8")
    failures = 0
    try:
        for lineno, line in enumerate(_read_lines(args.input), 1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise CotForgeError(f"{args.input}:{lineno}: invalid JSON ({exc.msg})") from None
            if not isinstance(rec, dict) or "_meta" in rec:
                continue
            if "sample_id" not in rec or "text" not in rec:
                raise CotForgeError(f"{args.input}:{lineno}: candidate record needs sample_id and text")
            item = dict(rec)
            if ("task" not in item or "gold_label" not in item) and rec["sample_id"] in lookup:
                sample = lookup[rec["sample_id"]]
                item.setdefault("task", sample.task.value)
                item.setdefault("gold_label", sample.gold_label)
            scored = score_item(lineno, item, config, lexicon, gc.label_spaces, args.length_threshold)
            scored.pop("index")
            if "error" in scored:
                failures += 1
                log.warning("%s:%d: %s", args.input, lineno, scored["error"]["message"])
            out.write(json.dumps({**item, **scored}, ensure_ascii=False) + "\n")
    finally:
        if out is not sys.stdout:
            out.close()
    if failures:
        log.warning("%d record(s) could not be scored", failures)
    return EXIT_OK


def cmd_serve(args, gc: GlobalConfig) -> int:
    serve(
        args.bind,
        _load_reward(args, gc),
        _load_lexicon(args, gc),
        spaces=gc.label_spaces,
        length_threshold=args.length_threshold,
    )
    return EXIT_OK


def cmd_eval(args, gc: GlobalConfig) -> int:
    task = TaskKind.parse(args.task)
    gen = GenerationConfig(temperature=args.temperature, max_tokens=args.max_tokens)
    ep = _endpoint(args, gc)
    result = evaluate(
        _samples_for(args.input, task),
        gen,
        ep,
        space=gc.label_spaces[task],
        override_protocol=args.override_protocol,
    )
    text = render_report([result])
    sys.stdout.write(text)
    if args.out:
        out = Path(args.out)
        records = out.with_suffix(".jsonl")
        if records == out:
            out = out.with_suffix(".txt")
        out.parent.mkdir(parents=True, exist_ok=True)
        out.write_text(text, encoding="utf-8")
        records.write_text(render_report_jsonl([result]), encoding="utf-8")
    return EXIT_OK


def cmd_stats(args, gc: GlobalConfig) -> int:
    report = dataset_stats(args.path, spaces=gc.label_spaces)
    if args.json:
        sys.stdout.write(json.dumps(report.to_dict(), indent=2) + "\n")
    else:
        sys.stdout.write(report.render())
    return EXIT_OK


def cmd_print_default_config(args, gc: GlobalConfig) -> int:
    if args.lexicon:
        sys.stdout.write(json.dumps(DEFAULT_LEXICON.to_dict(), indent=2) + "\n")
    else:
        sys.stdout.write(RewardConfig().to_json() + "\n")
    return EXIT_OK


COMMANDS = {
    "build-dataset": cmd_build,
    "score": cmd_score,
    "serve": cmd_serve,
    "eval": cmd_eval,
    "stats": cmd_stats,
    "print-default-config": cmd_print_default_config,
}


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    if not args.command:
        parser.print_usage(sys.stderr)
        sys.stderr.write("cot-forge: error: a command is required\n")
        return EXIT_USAGE
    try:
        gc = GlobalConfig.load(args.config) if args.config else GlobalConfig()
    except CotForgeError as exc:
        sys.stderr.write(f"cot-forge: {exc}\n")
        return EXIT_USAGE
    level = _pick(args.log_level, gc.log_level, "WARNING")
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr, force=True)
    try:
        return COMMANDS[args.command](args, gc)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        sys.stderr.write(f"cot-forge: error: {exc}\n")
        return EXIT_USAGE
    except (CotForgeError, OSError, ValueError) as exc:
        sys.stderr.write(f"cot-forge: {exc}\n")
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
