"""Python front end for the p2pgrid simulator.

Configs may be passed as dicts, JSON strings or None for the defaults.
"""

import json

from . import _core
from ._core import (
    ChecksumMismatch,
    ConfigError,
    DataError,
    Error,
    UnknownFormat,
    actor_loss,
    clear,
    gae,
)

__version__ = _core.__version__


def _text(config):
    if config is None:
        return ""
    if isinstance(config, str):
        return config
    return json.dumps(config)


def default_config():
    return json.loads(_core.default_config())


def config_hash(config=None):
    return _core.config_hash(_text(config))


def simulate(config=None, episodes=10):
    return _core.simulate(_text(config), episodes)


def compare(config=None, mechanisms=("jpq", "greedy", "mrda", "vvda"), episodes=10):
    """Returns (summary_csv, deltas_csv)."""
    return _core.compare(_text(config), list(mechanisms), episodes)


def train(config=None, episodes=10, out_dir="out", resume=False):
    return _core.train(_text(config), episodes, str(out_dir), resume)


class Env(_core.Env):
    def __init__(self, config=None):
        super().__init__(_text(config))


__all__ = [
    "ChecksumMismatch",
    "ConfigError",
    "DataError",
    "Env",
    "Error",
    "UnknownFormat",
    "actor_loss",
    "clear",
    "compare",
    "config_hash",
    "default_config",
    "gae",
    "simulate",
    "train",
]
