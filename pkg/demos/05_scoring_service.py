"""The HTTP scoring service, as an RL trainer would call it."""

# %%
import httpx

from cot_forge import ScoringService, score_text
from cot_forge.service import BackgroundServer

items = [
    {"task": "sarcasm", "gold_label": 1, "text": "Oh great, another Monday. Actually this is clearly ironic. Answer: 1"},
    {"task": "emotion", "gold_label": 4, "text": "The speaker laughs and thanks everyone. Answer: 4"},
    {"task": "humor", "gold_label": 7, "text": "bad label"},
]

# %%
with BackgroundServer(ScoringService()) as server, httpx.Client(trust_env=False) as client:
    print(client.get(server.url + "/healthz").json())
    body = client.post(server.url + "/v1/score", json={"items": items}).json()
    override = client.post(
        server.url + "/v1/score", json={"items": items[:1], "config_override": {"weights": {"diversity": 0.5}}}
    ).json()

for item in body["items"]:
    print(item)
print("fingerprint:", body["config_fingerprint"][:12], "->", override["config_fingerprint"][:12])

# %% HTTP and in-process scoring agree exactly.
direct = score_text("sarcasm", 1, items[0]["text"]).rewards.to_dict()
print(direct == body["items"][0]["rewards"])
