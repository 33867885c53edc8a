import json

import pytest
from hypothesis import given
from hypothesis import strategies as st

from cot_forge.chain import parse_chain
from cot_forge.core import (
    CandidateResponse,
    GenerationConfig,
    LabelSpace,
    MarkerKind,
    Sample,
    TaskKind,
    default_label_space,
    deserialize_candidate,
    deserialize_sample,
    serialize_candidate,
    serialize_sample,
)
from cot_forge.errors import LabelOutOfRange, RecordError
from cot_forge.reward import score_response


@pytest.mark.parametrize(
    "task,size",
    [(TaskKind.SENTIMENT, 2), (TaskKind.HUMOR, 2), (TaskKind.SARCASM, 2), (TaskKind.EMOTION, 7)],
)
def test_default_label_space_sizes(task, size):
    space = default_label_space(task)
    assert space.labels == tuple(range(size))
    assert space.task is task


def test_default_binary_names():
    assert default_label_space("sentiment").names == ("negative", "positive")
    assert default_label_space("humor").names == ("non-humorous", "humorous")
    assert default_label_space("sarcasm").names == ("non-sarcastic", "sarcastic")


def test_marker_kinds_cover_five_operations_plus_plain():
    assert len(TaskKind) == 4
    assert len([k for k in MarkerKind if k is not MarkerKind.PLAIN]) == 5


@pytest.mark.parametrize(
    "names",
    [("only",), ("a", "a"), ("a", ""), tuple(str(i) for i in range(11))],
)
def test_label_space_rejects_bad_inventories(names):
    with pytest.raises(ValueError):
        LabelSpace(TaskKind.EMOTION, names)


def test_label_space_membership():
    space = default_label_space("sentiment")
    assert 1 in space and 2 not in space and -1 not in space and True not in space
    with pytest.raises(LabelOutOfRange):
        space.check(5)


def test_generation_presets():
    ev = GenerationConfig.evaluation()
    assert (ev.temperature, ev.max_tokens) == (0.0, 10)
    assert GenerationConfig.dataset_building(4).candidates_per_prompt == 4
    with pytest.raises(ValueError):
        GenerationConfig(candidates_per_prompt=0)


samples = st.builds(
    Sample,
    id=st.text(min_size=1, max_size=20),
    task=st.sampled_from(list(TaskKind)),
    prompt_text=st.text(min_size=1).filter(str.strip),
    gold_label=st.integers(0, 1),
)


@given(samples)
def test_sample_round_trip(sample):
    line = serialize_sample(sample)
    assert "\n" not in line
    assert deserialize_sample(line) == sample


def test_sample_extra_fields_ignored():
    line = json.dumps({"id": "a", "task": "humor", "prompt_text": "x", "gold_label": 1, "source": "reddit"})
    assert deserialize_sample(line) == Sample("a", TaskKind.HUMOR, "x", 1)


def test_sample_missing_gold_label():
    with pytest.raises(RecordError, match="gold_label"):
        deserialize_sample(json.dumps({"id": "a", "task": "humor", "prompt_text": "x"}))


@pytest.mark.parametrize("line", ["not json", "[1, 2]", '{"id": "a", "task": "poetry", "prompt_text": "x", "gold_label": 0}'])
def test_sample_invalid_records(line):
    with pytest.raises(RecordError):
        deserialize_sample(line)


@given(st.text(min_size=1).filter(str.strip), st.integers(0, 1))
def test_candidate_round_trip_with_chain_and_rewards(text, gold):
    sample = Sample("s", TaskKind.SENTIMENT, "prompt", gold)
    cand = CandidateResponse("s", text, chain=parse_chain(text), rewards=score_response(sample, text))
    assert deserialize_candidate(serialize_candidate(cand)) == cand


def test_candidate_minimal_round_trip():
    cand = CandidateResponse("s1", "so 1", predicted_label=1)
    assert deserialize_candidate(serialize_candidate(cand)) == cand
    with pytest.raises(RecordError):
        deserialize_candidate('{"sample_id": "s1"}')
