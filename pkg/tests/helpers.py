"""Scripted endpoint behaviour shared by the dataset, eval and acceptance tests."""

import re
import threading
from collections import defaultdict

from cot_forge.core import Sample, TaskKind

_GOLD = re.compile(r"\[gold=(\d)\]")

REASONING = [
    "The text is short and the wording is plain.",
    "First, the opening line sets a neutral frame.",
    "However, the second clause reverses the tone entirely.",
    "Wait, the irony marker changes the reading.",
    "Let me check whether the ending is consistent with that.",
    "Actually, the speaker means the opposite of the literal words.",
]


def make_samples(n, task=TaskKind.SENTIMENT, num_labels=2, prefix="s"):
    return [
        Sample(f"{prefix}{i}", task, f"Text number {i} to classify. [gold={i % num_labels}]", i % num_labels)
        for i in range(n)
    ]


def gold_of(prompt):
    return int(_GOLD.search(prompt).group(1))


class HalfRight:
    """Every other request for the same prompt answers with the gold label.

    The k-th request for a prompt gets a reasoning body chosen from k and the
    prompt, so the set of responses per prompt is independent of arrival order.
    """

    def __init__(self, num_labels=2, long_every=3):
        self.num_labels = num_labels
        self.long_every = long_every
        self._counts = defaultdict(int)
        self._lock = threading.Lock()

    def __call__(self, prompt, index):
        with self._lock:
            k = self._counts[prompt]
            self._counts[prompt] += 1
        gold = gold_of(prompt)
        label = gold if k % 2 == 0 else (gold + 1) % self.num_labels
        body = " ".join(REASONING[(k + j) % len(REASONING)] for j in range(1 + k % 3))
        if k % self.long_every == 2:
            body += " " + " ".join(f"detail{j}" for j in range(120))
        return f"{body}\nAnswer: {label}"


def gold_echo(prompt, index):
    return str(gold_of(prompt))


# A sentiment response: 2 structural kinds, 20..120 tokens, no repeated trigram, ends in gold.
GOOD = (
    "First, the reviewer praises the acting and the score with obvious warmth. "
    "However, the pacing drags through a long middle section of this film. "
    "Overall the tone stays generous toward its cast and director. "
    "Answer: 1"
)
