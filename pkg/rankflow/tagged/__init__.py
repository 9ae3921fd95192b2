"""
RANKFLOW Tagged Particle Package

Limit dynamics of a single tagged particle, coupled to the simulator's streams.
"""

from rankflow.tagged.limit_path import TaggedPath, simulate_tagged_limit

__all__ = ["TaggedPath", "simulate_tagged_limit"]
