"""Scenario files, batch runs, sweeps, verification and the command line."""

from .runner import CheckResult, RunError, RunReport, run, sweep
from .scenario import Scenario, load_scenario, scenario_from_dict

__all__ = ["CheckResult", "RunError", "RunReport", "Scenario", "load_scenario", "run",
           "scenario_from_dict", "sweep"]
