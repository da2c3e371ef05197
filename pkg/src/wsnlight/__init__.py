"""Discrete-event simulator for a wireless daylight-harvesting lighting network."""

from .engine import RunResult, TraceRecord, run, simulate
from .energy import EnergyReport
from .errors import ValidationError
from .scenario import Scenario, load_scenario, validate

__all__ = [
    "EnergyReport",
    "RunResult",
    "Scenario",
    "TraceRecord",
    "ValidationError",
    "load_scenario",
    "run",
    "simulate",
    "validate",
]
