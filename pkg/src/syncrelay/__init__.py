"""Deterministic simulator of an automatic synchronizing and protection relay.

A modelled synchronous generator is black-started from standstill, brought
to the grid's frequency, voltage and phase by a PID governor and a pulsed
exciter, closed onto the bus by a sync-check relay and then guarded by five
definite-time protection elements.
"""

__version__ = "0.1.0"

from .errors import (InsufficientSignalError, InvalidArgumentError, InvalidStateError,
                     NumericalDivergenceError, ScenarioError, StaleMeasurementError,
                     SyncRelayError)
from .scenario import ScenarioConfig, dump_scenario, load_scenario, load_scenario_file
from .simulation import SimulationLog, read_csv, run_scenario, summarize, write_csv, write_events

__all__ = [
    "__version__",
    "InsufficientSignalError", "InvalidArgumentError", "InvalidStateError",
    "NumericalDivergenceError", "ScenarioError", "StaleMeasurementError", "SyncRelayError",
    "ScenarioConfig", "dump_scenario", "load_scenario", "load_scenario_file",
    "SimulationLog", "read_csv", "run_scenario", "summarize", "write_csv", "write_events",
]
