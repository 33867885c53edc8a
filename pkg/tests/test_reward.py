import json
import math
import random

import pytest
from hypothesis import given
from hypothesis import strategies as st

from cot_forge.chain import parse_chain
from cot_forge.core import MarkerKind, ReasoningChain, Sample, Segment, TaskKind
from cot_forge.errors import ConfigError, EmptyInput, InvalidBand
from cot_forge.reward import (
    DEFAULT_DEPTH_BANDS,
    RewardConfig,
    Weights,
    accuracy_reward,
    composite_reward,
    depth_reward,
    diversity_reward,
    load_reward_config,
    repetition_penalty,
    score_response,
)

from helpers import GOOD
from oracles import brute_depth, brute_repetition

K = MarkerKind


def test_accuracy_reward():
    assert accuracy_reward(1, 1) == 1.0
    assert accuracy_reward(0, 1) == 0.0
    assert accuracy_reward(None, 1) == 0.0


def test_depth_reward_examples():
    band = (10, 30, 120, 300)
    assert depth_reward((30 + 120) // 2, band) == 1.0
    assert depth_reward(10, band) == 0.0
    assert depth_reward(20, band) == 0.5
    assert depth_reward(300, band) == 0.0
    assert depth_reward(210, band) == 0.5
    assert depth_reward(0, band) == 0.0


@pytest.mark.parametrize("band", [(10, 10, 20, 30), (10, 30, 20, 40), (10, 20, 30, 30), (1, 2, 3)])
def test_depth_reward_invalid_band(band):
    with pytest.raises(InvalidBand):
        depth_reward(5, band)


def test_depth_allows_point_plateau():
    assert depth_reward(20, (10, 20, 20, 30)) == 1.0


@given(st.integers(0, 1000))
def test_depth_matches_oracle(length):
    for band in DEFAULT_DEPTH_BANDS.values():
        assert depth_reward(length, band) == brute_depth(length, band)


def _chain(*kinds):
    segs = tuple(Segment((i, i + 1), k, None if k is K.PLAIN else "x") for i, k in enumerate(kinds))
    return ReasoningChain(segs, len(kinds))


def test_diversity_reward():
    assert diversity_reward(_chain(K.PLAIN, K.PLAIN)) == 0.0
    assert diversity_reward(_chain(K.DECOMPOSITION, K.REFLECTION, K.REFLECTION)) == 0.4
    assert diversity_reward(_chain(*[k for k in K])) == 1.0
    assert diversity_reward(_chain()) == 0.0


def test_repetition_penalty_examples():
    assert repetition_penalty("a b a b a b", 2) == pytest.approx(0.6, abs=0)
    assert repetition_penalty("a b a b a b", 2) == 1 - 2 / 5
    assert repetition_penalty("one two three four five", 3) == 0.0
    assert repetition_penalty("single", 3) == 0.0
    assert repetition_penalty("", 2) == 0.0
    with pytest.raises(ValueError):
        repetition_penalty("a b", 1)


@given(st.lists(st.sampled_from("abc"), max_size=30), st.integers(2, 5))
def test_repetition_matches_oracle(tokens, n):
    text = " ".join(tokens)
    assert repetition_penalty(text, n) == brute_repetition(text, n)


def test_composite_examples():
    assert composite_reward(1, 0.8, 0.4, 0.6, Weights(1, 0.3, 0.2, 0.2)) == pytest.approx(1.20, abs=1e-12)
    assert composite_reward(1, 0.8, 0.4, 0.6, (0, 0, 0, 0)) == 0.0
    assert composite_reward(0, 0.8, 0.4, 0.6, (1, 0, 0, 0)) == 0.0


def test_default_config_values():
    cfg = RewardConfig()
    assert cfg.weights.as_tuple() == (1.0, 0.3, 0.2, 0.2)
    assert cfg.ngram_order == 3
    assert cfg.band("sentiment") == (5, 20, 120, 400)
    assert cfg.band(TaskKind.EMOTION) == (5, 30, 160, 400)
    assert cfg.band("humor") == (10, 40, 220, 600)
    assert cfg.band("sarcasm") == (10, 60, 300, 800)


def test_config_round_trip_and_override(tmp_path):
    cfg = RewardConfig()
    assert RewardConfig.from_dict(cfg.to_dict()) == cfg
    assert RewardConfig.from_dict(json.loads(cfg.to_json())).fingerprint() == cfg.fingerprint()
    tweaked = cfg.override({"weights": {"depth": 0.0}, "depth_bands": {"humor": [1, 2, 3, 4]}})
    assert tweaked.weights.as_tuple() == (1.0, 0.0, 0.2, 0.2)
    assert tweaked.band("humor") == (1, 2, 3, 4)
    assert tweaked.band("sarcasm") == cfg.band("sarcasm")
    assert tweaked.fingerprint() != cfg.fingerprint()
    assert cfg.override(None) is cfg
    path = tmp_path / "reward.json"
    path.write_text(json.dumps({"weights": [1, 0, 0, 0], "ngram_order": 4}))
    loaded = load_reward_config(path)
    assert loaded.weights.as_tuple() == (1, 0, 0, 0) and loaded.ngram_order == 4


@pytest.mark.parametrize(
    "partial",
    [
        {"weigths": {}},
        {"weights": {"accuracy": -1}},
        {"weights": {"style": 1}},
        {"weights": [1, 2]},
        {"ngram_order": 1},
        {"depth_bands": {"humor": [5, 4, 3, 2]}},
        {"depth_bands": {"poetry": [1, 2, 3, 4]}},
    ],
)
def test_config_rejects_bad_partials(partial):
    with pytest.raises((ConfigError, InvalidBand)):
        RewardConfig().override(partial)


def test_score_response_worked_example():
    sample = Sample("s", TaskKind.SENTIMENT, "Review text", 1)
    chain = parse_chain(GOOD)
    assert 20 <= chain.token_length <= 120
    assert {s.kind for s in chain.segments} - {K.PLAIN} == {K.DECOMPOSITION, K.CONTRADICTION}
    assert repetition_penalty(GOOD, 3) == 0.0
    v = score_response(sample, GOOD)
    assert (v.accuracy, v.depth, v.diversity, v.repetition_penalty) == (1.0, 1.0, 0.4, 0.0)
    assert v.composite == pytest.approx(1.38, abs=1e-12)


def test_score_response_errors_and_mapping():
    sample = Sample("s", TaskKind.SENTIMENT, "Review text", 1)
    with pytest.raises(EmptyInput):
        score_response(sample, "")
    v = score_response(sample, GOOD.replace("Answer: 1", "No idea."))
    assert v.accuracy == 0.0 and v.diversity == 0.4 and v.depth == 1.0
    v = score_response(sample, GOOD.replace("Answer: 1", "Answer: 7"))
    assert v.accuracy == 0.0


def test_composite_recomputes_exactly():
    rng = random.Random(0)
    sample = Sample("s", TaskKind.HUMOR, "joke", 0)
    cfg = RewardConfig()
    for _ in range(100):
        text = " ".join(rng.choice(["however", "a", "b", "wait.", "0", "1", "check."]) for _ in range(rng.randint(1, 80)))
        v = score_response(sample, text, cfg)
        assert math.isclose(v.composite, composite_reward(*v.components(), cfg.weights), abs_tol=1e-12)
