from .audits import run_audits
from .config import (ConfigError, ScenarioConfig, parse_scenario,
                     parse_scenario_text, with_overrides)
from .io import read_logs, report_json, write_outputs
from .metrics import COLUMNS, compute_report
from .runner import Runner, run_scenario

__all__ = [
    "COLUMNS", "ConfigError", "Runner", "ScenarioConfig", "compute_report",
    "parse_scenario", "parse_scenario_text", "read_logs", "report_json",
    "run_audits", "run_scenario", "with_overrides", "write_outputs",
]
