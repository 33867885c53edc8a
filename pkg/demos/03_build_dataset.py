"""Rejection-sampling an SFT dataset against a local scripted endpoint."""

# %%
import random
import tempfile
from pathlib import Path

from cot_forge import EndpointConfig, GenerationConfig, Sample, TaskKind, build_sft_dataset, dataset_stats
from cot_forge.stub import StubEndpoint

samples = [
    Sample(f"s{i}", TaskKind.SENTIMENT, f"Review {i}: the film was {'great' if i % 2 else 'dull'}.", i % 2)
    for i in range(20)
]
rng = random.Random(0)


def responder(prompt, index):
    # A noisy "model": usually right, sometimes wrong, sometimes long-winded.
    gold = 1 if "great" in prompt else 0
    label = gold if rng.random() < 0.6 else 1 - gold
    body = rng.choice([
        "The wording is positive throughout.",
        "First, the adjective sets the tone. However, the review is very short.",
        "Wait, this could be ironic. Let me check the rest of the sentence.",
    ])
    if rng.random() < 0.3:
        body += " " + " ".join(f"aside{j}" for j in range(110))
    return f"{body}\nAnswer: {label}"


# %%
out = Path(tempfile.mkdtemp()) / "sft.jsonl"
with StubEndpoint(responder) as stub:
    ep = EndpointConfig(stub.base_url, "demo-model", max_concurrency=4)
    report = build_sft_dataset(samples, GenerationConfig.dataset_building(4), ep, out)
print(report.render())

# %% Statistics can be recomputed from the file alone.
print(dataset_stats(out).to_dict() == report.to_dict())
print(out.read_text().splitlines()[1][:200], "...")
