"""Scenario configs, runners and reports."""
from .config import SCENARIOS, ScenarioConfig, ScenarioReport, dump_config, load_config, read_report
from .scenarios import DEFAULTS, run, validate

__all__ = [
    "SCENARIOS",
    "ScenarioConfig",
    "ScenarioReport",
    "DEFAULTS",
    "dump_config",
    "load_config",
    "read_report",
    "run",
    "validate",
]
