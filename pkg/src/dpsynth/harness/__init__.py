from .config import ConfigError, RunConfig, load_config, parse_config
from .runner import (
    EXIT_DEGRADED,
    EXIT_FAILED,
    EXIT_OK,
    HarnessError,
    cmd_evaluate,
    cmd_pipeline,
    cmd_report,
    cmd_synth,
    load_context,
    scan_for_leaks,
)

__all__ = [
    "EXIT_DEGRADED",
    "EXIT_FAILED",
    "EXIT_OK",
    "ConfigError",
    "HarnessError",
    "RunConfig",
    "cmd_evaluate",
    "cmd_pipeline",
    "cmd_report",
    "cmd_synth",
    "load_config",
    "load_context",
    "parse_config",
    "scan_for_leaks",
]
