"""
RANKFLOW Simulation Package

Finite-N ranking process and its observables.
"""

from rankflow.simulation.engine import SimOutput, TaggedTrace, simulate
from rankflow.simulation.observables import Anchor, EmpiricalSnapshot, empirical_U, empirical_V

__all__ = [
    "Anchor",
    "EmpiricalSnapshot",
    "SimOutput",
    "TaggedTrace",
    "empirical_U",
    "empirical_V",
    "simulate",
]
