"""Deterministic NAT simulator, scenario runner, and the webcall CLI."""

from .natsim import HostNetwork, NatModel, Reflector, SimNetwork
from .scenario import ScenarioError, ScenarioRunner, load_scenario, run_scenario_file

__all__ = [
    "HostNetwork",
    "NatModel",
    "Reflector",
    "ScenarioError",
    "ScenarioRunner",
    "SimNetwork",
    "load_scenario",
    "run_scenario_file",
]
