"""Global configuration file shared by every CLI subcommand.

Example::

    {
      "reward_config": "reward.json",
      "lexicon": "lexicon.json",
      "endpoint": {"base_url": "http://127.0.0.1:8000/v1", "model_name": "qwen2.5-7b"},
      "label_spaces": {"emotion": ["neutral", "joy", "sadness"]},
      "log_level": "INFO"
    }

Relative paths are resolved against the config file's directory. Unknown keys
are rejected so typos cannot silently fall back to defaults.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from .core import LabelSpace, TaskKind, default_label_spaces
from .errors import ConfigError

TOP_LEVEL_KEYS = {"reward_config", "lexicon", "endpoint", "label_spaces", "log_level"}
ENDPOINT_KEYS = {"base_url", "model_name", "api_key", "timeout", "max_retries", "max_concurrency", "min_request_interval"}
LOG_LEVELS = ("DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL")


@dataclass
class GlobalConfig:
    reward_config: Path | None = None
    lexicon: Path | None = None
    endpoint: dict[str, Any] = field(default_factory=dict)
    label_spaces: dict[TaskKind, LabelSpace] = field(default_factory=default_label_spaces)
    log_level: str | None = None

    @classmethod
    def load(cls, path: str | Path) -> "GlobalConfig":
        path = Path(path)
        try:
            data = json.loads(path.read_text(encoding="utf-8"))
        except FileNotFoundError:
            raise ConfigError(f"config file not found: {path}") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON ({exc.msg})") from None
        if not isinstance(data, dict):
            raise ConfigError(f"{path}: config must be a JSON object")
        return cls.from_dict(data, base_dir=path.parent)

    @classmethod
    def from_dict(cls, data: dict[str, Any], base_dir: Path = Path(".")) -> "GlobalConfig":
        for key in data:
            if key not in TOP_LEVEL_KEYS:
                raise ConfigError(f"unknown config key: {key!r}")
        cfg = cls()
        for key in ("reward_config", "lexicon"):
            if data.get(key) is not None:
                p = Path(data[key])
                p = p if p.is_absolute() else base_dir / p
                if not p.is_file():
                    raise ConfigError(f"{key}: file does not exist: {p}")
                setattr(cfg, key, p)
        endpoint = data.get("endpoint") or {}
        if not isinstance(endpoint, dict):
            raise ConfigError("endpoint must be an object")
        for key in endpoint:
            if key not in ENDPOINT_KEYS:
                raise ConfigError(f"unknown config key: 'endpoint.{key}'")
        cfg.endpoint = dict(endpoint)
        spaces = data.get("label_spaces") or {}
        if not isinstance(spaces, dict):
            raise ConfigError("label_spaces must be an object keyed by task")
        for task, names in spaces.items():
            try:
                t = TaskKind.parse(task)
            except ValueError:
                raise ConfigError(f"unknown config key: 'label_spaces.{task}'") from None
            try:
                cfg.label_spaces[t] = LabelSpace(t, tuple(names))
            except (TypeError, ValueError) as exc:
                raise ConfigError(f"label_spaces.{task}: {exc}") from None
        level = data.get("log_level")
        if level is not None:
            if str(level).upper() not in LOG_LEVELS:
                raise ConfigError(f"log_level must be one of {', '.join(LOG_LEVELS)}")
            cfg.log_level = str(level).upper()
        return cfg
