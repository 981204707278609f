"""Scenario construction, model-in-the-loop runs, metrics and batteries."""

from .battery import BatteryResult, BatterySpec, run_battery, run_one
from .export import (ExportError, build_summary, export_battery, read_results_csv, read_run_csv,
                     read_summary_json, write_controller_csv, write_long_csv, write_results_csv,
                     write_run_csv, write_summary_json)
from .metrics import Metrics, aggregate, compute_metrics
from .run import PlantConfig, RunRecord, run_test
from .scenario import DOMAIN_CONFIGS, Scenario, ScenarioError, ScenarioSpec, TestCase, build_scenario

__all__ = ["BatteryResult", "BatterySpec", "DOMAIN_CONFIGS", "ExportError", "Metrics", "PlantConfig",
           "RunRecord", "Scenario", "ScenarioError", "ScenarioSpec", "TestCase", "aggregate",
           "build_scenario", "build_summary", "compute_metrics", "export_battery",
           "read_results_csv", "read_run_csv", "read_summary_json", "run_battery", "run_one",
           "run_test", "write_controller_csv", "write_long_csv", "write_results_csv",
           "write_run_csv", "write_summary_json"]
