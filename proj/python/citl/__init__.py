"""Python bindings for the citl navigation core.

Run configurations are plain dicts using the same keys as the JSON config
files accepted by the ``citl`` command-line tool.
"""

import json
from typing import Any, Mapping, Optional

from ._citl import (
    ConfigError,
    NavGraph,
    check,
    circle_loss,
    info_nce,
    pair_mining,
)
from . import _citl

__all__ = [
    "ConfigError",
    "NavGraph",
    "ablate",
    "check",
    "circle_loss",
    "evaluate",
    "gen",
    "info_nce",
    "pair_mining",
    "resolve_config",
    "train",
]


def _dump(config: Optional[Mapping[str, Any]]) -> str:
    return json.dumps(dict(config or {}))


def resolve_config(config: Optional[Mapping[str, Any]] = None) -> dict:
    """Full configuration with defaults filled in."""
    return json.loads(_citl._resolve_config(_dump(config)))


def gen(config: Optional[Mapping[str, Any]] = None, out: str = "") -> dict:
    return _citl._gen(_dump(config), out)


def train(config: Optional[Mapping[str, Any]] = None) -> dict:
    return _citl._train(_dump(config))


def evaluate(config: Optional[Mapping[str, Any]] = None, split: str = "unseen") -> dict:
    return _citl._eval(_dump(config), split)


def ablate(config: Optional[Mapping[str, Any]] = None) -> list:
    return _citl._ablate(_dump(config))
