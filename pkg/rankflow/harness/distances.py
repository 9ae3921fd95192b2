"""
RANKFLOW Distances

Distances between a finite-N run and the hydrodynamic limit. U^N is a step
function of y that is constant on the cells ((k-1)/N, k/N], and every component
of the limit U is continuous and non-increasing in y. On a cell, the limit
stays between its values at the two cell ends, so comparing against both ends
bounds the off-grid error and certifies the sup over all y with N + 1 limit
evaluations.
"""

from itertools import product
from typing import Union

import numpy as np

from rankflow.limit.field import CharacteristicField, LimitMeasure
from rankflow.model.spec import ModelSpec
from rankflow.simulation.engine import SimOutput, TaggedTrace
from rankflow.simulation.observables import EmpiricalSnapshot, tail_start
from rankflow.tagged.limit_path import TaggedPath

VELOCITY_GRID_POINTS = 101

Limit = Union[LimitMeasure, CharacteristicField]


def _field(limit: Limit) -> CharacteristicField:
    return limit.field if isinstance(limit, LimitMeasure) else limit


def _breakpoint_values(snapshot: EmpiricalSnapshot, limit: Limit, t: float):
    N = snapshot.N
    step = snapshot.tail_counts() / N
    smooth = _field(limit).U_many(np.linspace(0.0, 1.0, N + 1), t)
    return step, smooth


def sup_distance_monotone(snapshot: EmpiricalSnapshot, limit: Limit, t: float) -> float:
    """
    Certified sup over y in [0, 1] of sum_a |U^N_a(y, t) - U_a(y, t)|.

    The result is an upper bound that is attained up to the limit's variation
    within one cell, and never smaller than plain_grid_distance.
    """
    step, smooth = _breakpoint_values(snapshot, limit, t)
    at_origin = np.abs(step[:, 0] - smooth[:, 0]).sum()
    cells = step[:, 1:]
    per_type = np.maximum(np.abs(cells - smooth[:, :-1]), np.abs(cells - smooth[:, 1:]))
    return float(max(at_origin, per_type.sum(axis=0).max()))


def plain_grid_distance(snapshot: EmpiricalSnapshot, limit: Limit, t: float) -> float:
    """max over y = k/N of sum_a |U^N_a(y, t) - U_a(y, t)|."""
    step, smooth = _breakpoint_values(snapshot, limit, t)
    return float(np.abs(step - smooth).sum(axis=0).max())


def distance_U(output: SimOutput, limit: Limit) -> float:
    """D_U: certified sup-distance over every snapshot of a run."""
    return max(
        (sup_distance_monotone(snap, limit, snap.time) for snap in output.snapshots),
        default=0.0,
    )


def distance_Yc(output: SimOutput, field: CharacteristicField) -> float:
    """D_Yc: sup over anchors and sampled times of |Y^N_C(t) - y_C(anchor, t)|."""
    worst = 0.0
    for anchor, samples in output.yc.items():
        for t, value in samples:
            worst = max(worst, abs(value - field.y_C(anchor, t)))
    return worst


def distance_tagged(trace: TaggedTrace, path: TaggedPath) -> float:
    """sup over the limit path's sample grid of |Y^N(t) - Y(t)|."""
    return float(np.abs(trace.position_at(path.times) - path.positions).max())


def type_subsets(A: int) -> list[tuple[float, ...]]:
    """Indicator weights 1_B of every non-empty subset B of the A types."""
    return [h for h in product((0.0, 1.0), repeat=A) if any(h)]


def distance_V(
    snapshot: EmpiricalSnapshot,
    model: ModelSpec,
    field: CharacteristicField,
    points: int = VELOCITY_GRID_POINTS,
) -> float:
    """sup over subsets B and a uniform y grid of |V^N(B, y, t) - V(1_B, y, t)|."""
    ys = np.linspace(0.0, 1.0, points)
    starts = np.array([tail_start(snapshot.N, y) for y in ys])
    worst = 0.0
    for h in type_subsets(model.A):
        empirical = snapshot.velocity_profile(model, h)[starts]
        limit = field.V_many(h, ys, snapshot.time)
        worst = max(worst, float(np.abs(empirical - limit).max()))
    return worst


def distance_V_run(output: SimOutput, model: ModelSpec, field: CharacteristicField) -> float:
    return max((distance_V(snap, model, field) for snap in output.snapshots), default=0.0)
