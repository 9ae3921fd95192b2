"""
RANKFLOW Model Package

Model files, the global rate bound and initial type assignment.
"""

from rankflow.model.assignment import AssignmentMode, TypeAssignment, make_assignment
from rankflow.model.bounds import rate_bound
from rankflow.model.spec import ModelSpec, load_model, model_hash

__all__ = [
    "AssignmentMode",
    "ModelSpec",
    "TypeAssignment",
    "load_model",
    "make_assignment",
    "model_hash",
    "rate_bound",
]
