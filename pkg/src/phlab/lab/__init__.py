"""Scenario configuration, built-in catalog, experiment orchestration and reports."""

from .catalog import builtin, builtin_catalog
from .runner import Report, discontinuity_experiment, run_catalog, run_scenario
from .schema import Scenario, ScenarioError, load, validate
from .verify import Verdict, verify_inequalities

__all__ = [
    "Report", "Scenario", "ScenarioError", "Verdict", "builtin", "builtin_catalog",
    "discontinuity_experiment", "load", "run_catalog", "run_scenario", "validate",
    "verify_inequalities",
]
