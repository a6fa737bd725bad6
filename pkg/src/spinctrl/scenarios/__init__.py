"""Scenario configs, the runner and the command line."""

from .catalog import built_in_scenarios, get_scenario
from .config import ConfigError, Diagnostic, ScenarioConfig, load_config, validate
from .runner import RunManifest, run

__all__ = [
    "ConfigError",
    "Diagnostic",
    "RunManifest",
    "ScenarioConfig",
    "built_in_scenarios",
    "get_scenario",
    "load_config",
    "run",
    "validate",
]
