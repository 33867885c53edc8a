"""Fixed-protocol evaluation and a results table."""

# %%
from cot_forge import EndpointConfig, GenerationConfig, Sample, TaskKind, evaluate, render_report
from cot_forge.errors import ProtocolViolation
from cot_forge.stub import StubEndpoint

test_set = [Sample(f"t{i}", TaskKind.HUMOR, f"Joke {i} [{i % 2}]", i % 2) for i in range(40)]


def oracle(prompt, index):
    return prompt[-2]  # echoes the gold digit


def lazy(prompt, index):
    return "0"


# %%
results = []
with StubEndpoint(oracle) as a, StubEndpoint(lazy) as b:
    for stub, name in ((a, "oracle"), (b, "always-zero")):
        ep = EndpointConfig(stub.base_url, name)
        results.append(evaluate(test_set, GenerationConfig.evaluation(), ep))

    # %% Evaluation refuses to sample unless explicitly overridden.
    try:
        evaluate(test_set, GenerationConfig(temperature=0.7), EndpointConfig(a.base_url, "oracle"))
    except ProtocolViolation as exc:
        print("refused:", exc)

print(render_report(results))
print(results[1].confusion)
