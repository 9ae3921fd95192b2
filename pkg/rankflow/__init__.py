"""
RANKFLOW - Ranking Process Hydrodynamics

Simulation of the move-to-front stochastic ranking process with rank- and
time-dependent jump rates, the deterministic hydrodynamic limit it converges
to, and a harness that measures the distance between the two.
"""

__version__ = "0.1.0"
__author__ = "RANKFLOW Development Team"
