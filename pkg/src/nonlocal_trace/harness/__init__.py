"""Experiment harness: configs, studies, CSV reports and figures."""

from .config import ConfigError, ExperimentConfig, FunctionDef, DomainDef, load_config, format_config
from .defaults import default_config
from .report import Row, rows_to_csv, write_csv
from .studies import run_study, summarize, tasks_for

__all__ = ["ConfigError", "ExperimentConfig", "FunctionDef", "DomainDef", "load_config", "format_config",
           "default_config", "Row", "rows_to_csv", "write_csv", "run_study", "summarize", "tasks_for"]
