"""Three-degree-of-freedom lifting entry simulator with four-phase guidance."""
from .atmosphere import AtmosphereSample
from .dynamics import GuidanceCommand, State, StateDerivative, VehicleParams
from .engine import Scenario, TerminalReport, Trajectory, run
from .guidance import EntryConditions, GuidanceConfig, GuidancePhase, SeekerMeasurement

__version__ = "0.1.0"

__all__ = [
    "AtmosphereSample", "EntryConditions", "GuidanceCommand", "GuidanceConfig", "GuidancePhase",
    "Scenario", "SeekerMeasurement", "State", "StateDerivative", "TerminalReport", "Trajectory",
    "VehicleParams", "run",
]
