from .model import (
    ContactLost,
    GroundGeometry,
    Measurement,
    NoConsistentMode,
    NoiseModel,
    ObjectModel,
    SimParams,
    SimulationFault,
    WorldState,
)
from .modes import CandidateResult, ModeHypothesis, RawState
from .world import Simulator

__all__ = [
    "ContactLost",
    "GroundGeometry",
    "Measurement",
    "NoConsistentMode",
    "NoiseModel",
    "ObjectModel",
    "SimParams",
    "SimulationFault",
    "WorldState",
    "CandidateResult",
    "ModeHypothesis",
    "RawState",
    "Simulator",
]
