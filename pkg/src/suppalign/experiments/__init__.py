"""Scenario-driven Monte Carlo experiments and the acceptance report."""
from .results import ResultTable, write_csv, write_json
from .scenario import Scenario, ScenarioError, bundled_scenarios, load_scenario, parse_scenario

__all__ = ["ResultTable", "Scenario", "ScenarioError", "bundled_scenarios", "load_scenario",
           "parse_scenario", "write_csv", "write_json"]
