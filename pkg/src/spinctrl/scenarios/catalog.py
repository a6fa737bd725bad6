"""Built-in scenarios shipped as YAML files next to this module."""

from __future__ import annotations

from functools import lru_cache
from pathlib import Path

from .config import ScenarioConfig, load_config

CONFIG_DIR = Path(__file__).parent / "configs"


@lru_cache(maxsize=None)
def _load_all() -> tuple[ScenarioConfig, ...]:
    return tuple(load_config(p) for p in sorted(CONFIG_DIR.glob("*.yaml")))


def built_in_scenarios() -> list[ScenarioConfig]:
    """Fresh copies of every built-in scenario, sorted by file name."""
    import copy

    return [copy.deepcopy(c) for c in _load_all()]


def scenario_names() -> list[str]:
    return [c.name for c in _load_all()]


def get_scenario(name: str) -> ScenarioConfig:
    for cfg in built_in_scenarios():
        if cfg.name == name:
            return cfg
    raise KeyError(f"no built-in scenario named {name!r}; try `spinctrl list`")
