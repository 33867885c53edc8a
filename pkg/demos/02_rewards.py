"""Composite rewards: accuracy, depth, diversity and a repetition penalty."""

# %%
from cot_forge import RewardConfig, repetition_penalty, score_text
from cot_forge.reward import DEFAULT_DEPTH_BANDS, depth_reward

config = RewardConfig()
print(config.to_json())
print("fingerprint:", config.fingerprint())

# %% A short trace with two structural moves that ends on the gold label.
good = (
    "First, the reviewer praises the acting and the score with obvious warmth. "
    "However, the pacing drags through a long middle section of this film. "
    "Overall the tone stays generous toward its cast and director. "
    "Answer: 1"
)
print(score_text("sentiment", 1, good).rewards)

# %% The same trace looped three times is penalised for repetition.
looped = " ".join([good] * 3)
print(score_text("sentiment", 1, looped).rewards)
print("a b a b a b, n=2 ->", repetition_penalty("a b a b a b", 2))

# %% The depth reward is a trapezoid over token length.
band = DEFAULT_DEPTH_BANDS["sentiment"]
for n in (0, 5, 10, 20, 120, 300, 400):
    print(f"{n:>4} tokens -> {depth_reward(n, band):.3f}")

# %% Partial overrides keep everything else.
flat = config.override({"weights": {"depth": 0.0}})
print(score_text("sentiment", 1, good, flat).rewards.composite, flat.fingerprint()[:12])
