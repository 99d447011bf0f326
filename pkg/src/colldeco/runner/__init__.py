"""Command line runner: scenario files in, JSON/CSV results and a run manifest out."""

from colldeco.runner.scenario import MODES, Scenario, parse_scenario, parse_scenario_text
from colldeco.runner.modes import run

__all__ = ["MODES", "Scenario", "parse_scenario", "parse_scenario_text", "run"]
