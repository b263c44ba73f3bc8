"""Scenario construction and batch experiments."""

from .experiment import CellResult, ExperimentReport, run_cell, run_experiment, sweep
from .generators import (commercial_instance_for_depth, initial_configs, random_commercial_instance,
                         random_shortest_path_instance)
from .scenarios import Scenario, bad_gadget_scenario
