"""
RANKFLOW Limit Package

Hydrodynamic limit: characteristic fields, boundary densities and the
limit measures built on them.
"""

from rankflow.limit.field import (
    CharacteristicField,
    FieldDiagnostics,
    LimitMeasure,
    U_of,
    V_of,
    invert_characteristics,
    phi,
    y_C,
)
from rankflow.limit.solver import solve_f, solve_field, solve_g_eta

__all__ = [
    "CharacteristicField",
    "FieldDiagnostics",
    "LimitMeasure",
    "U_of",
    "V_of",
    "invert_characteristics",
    "phi",
    "solve_f",
    "solve_field",
    "solve_g_eta",
    "y_C",
]
