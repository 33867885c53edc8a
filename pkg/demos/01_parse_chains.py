"""Splitting a reasoning trace into tagged segments."""

# %%
from cot_forge import DEFAULT_LEXICON, default_label_space, extract_label, parse_chain
from cot_forge.chain import is_nonlinear

text = (
    "First, the reviewer calls the plot thin. "
    "However, they praise the lead performance at length. "
    "Wait, the closing line is sarcastic about the ending.\n"
    "Let me check the overall tone once more. "
    "Answer: 0"
)
chain = parse_chain(text)

# %% Every segment carries its span, kind and the phrase that triggered it.
for seg in chain.segments:
    start, end = seg.span
    print(f"{seg.kind.value:<14} {seg.trigger or '-':<12} {text[start:end].strip()!r}")
print("answer span:", text[slice(*chain.answer_span)] if chain.answer_span else None)
print("tokens:", chain.token_length, "nonlinear:", is_nonlinear(chain))

# %% The spans tile the input exactly.
spans = [s.span for s in chain.segments] + [chain.answer_span]
assert "".join(text[a:b] for a, b in spans) == text

# %% Digit mapping reads the last digit of the output.
space = default_label_space("sentiment")
print("label:", extract_label(text, space), space.name(extract_label(text, space)))

# %% Extending the lexicon is a pure operation; the default is untouched.
from cot_forge import MarkerKind

custom = DEFAULT_LEXICON.with_phrase(MarkerKind.REFLECTION, "thinking again")
print(parse_chain("Thinking again, the joke lands. Answer: 1", custom).kinds)
