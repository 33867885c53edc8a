import io
import json
import logging
import re

import pytest

from cot_forge import cli
from cot_forge.chain import DEFAULT_LEXICON
from cot_forge.config import GlobalConfig
from cot_forge.core import serialize_sample
from cot_forge.errors import ConfigError
from cot_forge.reward import RewardConfig

from helpers import HalfRight, gold_echo, make_samples


def run(argv, capsys):
    code = cli.main(argv)
    out, err = capsys.readouterr()
    return code, out, err


@pytest.fixture
def samples_file(tmp_path):
    path = tmp_path / "samples.jsonl"
    path.write_text("".join(serialize_sample(s) + "\n" for s in make_samples(4)))
    return path


def test_print_default_config(capsys):
    code, out, _ = run(["print-default-config"], capsys)
    assert code == 0
    assert out == RewardConfig().to_json() + "\n"
    data = json.loads(out)
    assert list(data["weights"].values()) == [1.0, 0.3, 0.2, 0.2]
    assert RewardConfig.from_dict(data) == RewardConfig()
    code, out, _ = run(["print-default-config", "--lexicon"], capsys)
    assert json.loads(out) == DEFAULT_LEXICON.to_dict()


def test_unknown_subcommand(capsys):
    code, _, err = run(["frobnicate"], capsys)
    assert code == 1
    assert "usage:" in err


def test_missing_subcommand(capsys):
    code, _, err = run([], capsys)
    assert code == 1 and "usage:" in err


def test_missing_required_flag(capsys):
    code, _, err = run(["build-dataset", "--task", "humor"], capsys)
    assert code == 1 and "usage:" in err


def test_help_exits_zero(capsys):
    code, out, _ = run(["--help"], capsys)
    assert code == 0 and "build-dataset" in out


DOCUMENTED_FLAGS = {
    "build-dataset": ["--task", "--in", "--out", "--n", "--endpoint", "--model", "--balance", "--length-threshold", "--config", "--log-level", "--seed"],
    "score": ["--in", "--out", "--samples", "--reward-config", "--lexicon"],
    "serve": ["--bind", "--reward-config", "--lexicon"],
    "eval": ["--task", "--in", "--endpoint", "--model", "--override-protocol", "--temperature", "--max-tokens", "--out"],
    "stats": ["--json"],
    "print-default-config": ["--lexicon"],
}


@pytest.mark.parametrize("command", sorted(DOCUMENTED_FLAGS))
def test_help_completeness(command, capsys):
    code, out, _ = run([command, "--help"], capsys)
    assert code == 0
    for flag in DOCUMENTED_FLAGS[command]:
        assert re.search(rf"(?<![\w-]){re.escape(flag)}(?![\w-])", out), flag


def test_top_level_help_lists_commands(capsys):
    _, out, _ = run(["--help"], capsys)
    for command in DOCUMENTED_FLAGS:
        assert command in out
    for flag in ("--config", "--log-level", "--seed"):
        assert flag in out


# config loading and precedence -----------------------------------------------------------


def test_unknown_config_key(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"reward_cfg": "x"}))
    code, _, err = run(["--config", str(cfg), "print-default-config"], capsys)
    assert code == 1 and "reward_cfg" in err
    cfg.write_text(json.dumps({"endpoint": {"url": "x"}}))
    with pytest.raises(ConfigError, match="endpoint.url"):
        GlobalConfig.load(cfg)


def test_config_missing_referenced_file(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"lexicon": "nope.json"}))
    with pytest.raises(ConfigError, match="does not exist"):
        GlobalConfig.load(cfg)


def test_config_label_space_override(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"label_spaces": {"emotion": ["calm", "upset", "elated"]}}))
    gc = GlobalConfig.load(cfg)
    assert len(gc.label_spaces[cli.TaskKind.EMOTION]) == 3
    assert len(gc.label_spaces[cli.TaskKind.SENTIMENT]) == 2


def _args(argv):
    return cli.build_parser().parse_args(argv)


def test_precedence_reward_config(tmp_path):
    from_file = tmp_path / "file.json"
    from_file.write_text(json.dumps({"ngram_order": 4}))
    from_flag = tmp_path / "flag.json"
    from_flag.write_text(json.dumps({"ngram_order": 5}))
    gc_file = GlobalConfig(reward_config=from_file)
    assert cli._load_reward(_args(["serve"]), GlobalConfig()).ngram_order == 3
    assert cli._load_reward(_args(["serve"]), gc_file).ngram_order == 4
    assert cli._load_reward(_args(["serve", "--reward-config", str(from_flag)]), gc_file).ngram_order == 5


def test_precedence_lexicon(tmp_path):
    lex_file = tmp_path / "a.json"
    lex_file.write_text(json.dumps({"contradiction": ["however"], "reflection": ["hmm"]}))
    lex_flag = tmp_path / "b.json"
    lex_flag.write_text(json.dumps({"contradiction": ["however"], "correction": ["oops"]}))
    gc = GlobalConfig(lexicon=lex_file)
    assert cli._load_lexicon(_args(["serve"]), GlobalConfig()) == DEFAULT_LEXICON
    assert "hmm" in cli._load_lexicon(_args(["serve"]), gc).to_dict()["reflection"]
    assert "oops" in cli._load_lexicon(_args(["serve", "--lexicon", str(lex_flag)]), gc).to_dict()["correction"]


ENDPOINT_FLAGS = [
    ("--endpoint", "base_url", "http://flag:1/v1", "http://file:1/v1", None),
    ("--model", "model_name", "flag-model", "file-model", None),
    ("--timeout", "timeout", "5", 7.0, 60.0),
    ("--max-retries", "max_retries", "1", 2, 3),
    ("--max-concurrency", "max_concurrency", "8", 6, 4),
]


@pytest.mark.parametrize("flag,key,flag_value,file_value,default", ENDPOINT_FLAGS)
def test_precedence_endpoint(flag, key, flag_value, file_value, default):
    base = ["eval", "--task", "humor", "--in", "x"]
    required = {"base_url": "http://d:1/v1", "model_name": "d"}
    gc_file = GlobalConfig(endpoint={**required, key: file_value})
    with_flag = cli._endpoint(_args(base + [flag, flag_value]), gc_file)
    got = getattr(with_flag, key)
    assert str(got) == flag_value or got == type(got)(flag_value)
    assert getattr(cli._endpoint(_args(base), gc_file), key) == file_value
    if default is not None:
        assert getattr(cli._endpoint(_args(base), GlobalConfig(endpoint=required)), key) == default


def test_missing_endpoint_is_usage_error(samples_file, capsys):
    code, _, err = run(["eval", "--task", "sentiment", "--in", str(samples_file)], capsys)
    assert code == 1 and "--endpoint" in err


def test_precedence_log_level(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"log_level": "ERROR"}))
    run(["print-default-config"], capsys)
    assert logging.getLogger().level == logging.WARNING
    run(["--config", str(cfg), "print-default-config"], capsys)
    assert logging.getLogger().level == logging.ERROR
    run(["--config", str(cfg), "print-default-config", "--log-level", "debug"], capsys)
    assert logging.getLogger().level == logging.DEBUG
    logging.getLogger().setLevel(logging.WARNING)


def test_seed_flag_reaches_balance(monkeypatch, make_stub, samples_file, tmp_path, capsys):
    seen = {}
    real = cli.build_sft_dataset

    def spy(*a, **kw):
        seen["seed"] = kw["seed"]
        return real(*a, **kw)

    monkeypatch.setattr(cli, "build_sft_dataset", spy)
    stub = make_stub(HalfRight())
    argv = ["--seed", "11", "build-dataset", "--task", "sentiment", "--in", str(samples_file), "--out", str(tmp_path / "o.jsonl"), "--n", "2", "--endpoint", stub.base_url, "--model", "m", "--balance"]
    code, _, _ = run(argv, capsys)
    assert code == 0 and seen["seed"] == 11


# subcommands end to end -----------------------------------------------------------------


def test_build_stats_score(make_stub, samples_file, tmp_path, capsys, monkeypatch):
    stub = make_stub(HalfRight())
    out = tmp_path / "sft.jsonl"
    code, text, err = run(
        ["build-dataset", "--task", "sentiment", "--in", str(samples_file), "--out", str(out), "--n", "4", "--endpoint", stub.base_url, "--model", "m"],
        capsys,
    )
    assert code == 0, err
    assert "sentiment" in text
    code, text, _ = run(["stats", str(out)], capsys)
    assert code == 0 and "sentiment" in text
    code, text, _ = run(["stats", str(out), "--json"], capsys)
    assert json.loads(text)["sentiment"]["candidates_retained"] == 8

    scored = tmp_path / "scored.jsonl"
    code, _, _ = run(["score", "--in", str(out), "--out", str(scored)], capsys)
    assert code == 0
    rows = [json.loads(l) for l in scored.read_text().splitlines()]
    assert len(rows) == 8 and all(r["rewards"]["accuracy"] == 1.0 for r in rows)

    candidates = "".join(json.dumps({"sample_id": f"s{i}", "text": f"so {i % 2}"}) + "\n" for i in range(4))
    monkeypatch.setattr("sys.stdin", io.StringIO(candidates))
    code, text, _ = run(["score", "--samples", str(samples_file)], capsys)
    assert code == 0
    rows = [json.loads(l) for l in text.splitlines()]
    assert [r["predicted_label"] for r in rows] == [0, 1, 0, 1]
    assert all(r["rewards"]["accuracy"] == 1.0 for r in rows)


def test_score_reports_unscorable_inline(tmp_path, capsys):
    path = tmp_path / "c.jsonl"
    path.write_text(json.dumps({"sample_id": "x", "text": "so 1"}) + "\n")
    code, text, _ = run(["score", "--in", str(path)], capsys)
    assert code == 0
    assert json.loads(text)["error"]["code"] == "INVALID_ITEM"


def test_stats_runtime_error(tmp_path, capsys):
    path = tmp_path / "bad.jsonl"
    path.write_text("{oops\n")
    code, _, err = run(["stats", str(path)], capsys)
    assert code == 2 and ":1:" in err
    code, _, _ = run(["stats", str(tmp_path / "missing.jsonl")], capsys)
    assert code == 2


def test_build_task_mismatch(make_stub, samples_file, tmp_path, capsys):
    stub = make_stub(HalfRight())
    code, _, err = run(
        ["build-dataset", "--task", "humor", "--in", str(samples_file), "--out", str(tmp_path / "o.jsonl"), "--n", "1", "--endpoint", stub.base_url, "--model", "m"],
        capsys,
    )
    assert code == 2 and "expected humor" in err


def test_build_replay(make_stub, samples_file, tmp_path, capsys):
    stub = make_stub(HalfRight())
    first, tr = tmp_path / "a.jsonl", tmp_path / "t.jsonl"
    common = ["build-dataset", "--task", "sentiment", "--in", str(samples_file), "--n", "3", "--model", "m"]
    assert run(common + ["--out", str(first), "--endpoint", stub.base_url, "--transcript-out", str(tr)], capsys)[0] == 0
    second = tmp_path / "b.jsonl"
    assert run(common + ["--out", str(second), "--endpoint", stub.base_url, "--replay", str(tr)], capsys)[0] == 0
    assert first.read_bytes() == second.read_bytes()


def test_eval_subcommand(make_stub, samples_file, tmp_path, capsys):
    stub = make_stub(gold_echo)
    report = tmp_path / "report.txt"
    base = ["eval", "--task", "sentiment", "--in", str(samples_file), "--endpoint", stub.base_url, "--model", "m"]
    code, text, _ = run(base + ["--out", str(report)], capsys)
    assert code == 0
    assert "1.0000" in text and report.read_text() == text
    rec = json.loads((tmp_path / "report.jsonl").read_text())
    assert rec["accuracy"] == 1.0 and rec["task"] == "sentiment"

    code, _, err = run(base + ["--temperature", "0.5"], capsys)
    assert code == 2 and "override" in err
    code, _, _ = run(base + ["--temperature", "0.5", "--override-protocol"], capsys)
    assert code == 0
