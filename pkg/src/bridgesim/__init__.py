"""Discrete-event simulator for cross-chain bridge security experiments."""

from .engine import RunResult, Simulation, compute_metrics, run_batch, run_scenario
from .presets import PRESETS, build_preset, preset_names
from .scenario import ChainSpec, Expected, RandomTraffic, Scenario, TrafficItem

__all__ = [
    "ChainSpec",
    "Expected",
    "PRESETS",
    "RandomTraffic",
    "RunResult",
    "Scenario",
    "Simulation",
    "TrafficItem",
    "build_preset",
    "compute_metrics",
    "preset_names",
    "run_batch",
    "run_scenario",
]

__version__ = "0.1.0"
