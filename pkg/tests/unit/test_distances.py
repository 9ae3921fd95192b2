"""
Tests for the run-versus-limit distances.
"""

import numpy as np
import pytest

from rankflow.harness.distances import (
    distance_tagged,
    distance_U,
    distance_V,
    distance_V_run,
    distance_Yc,
    plain_grid_distance,
    sup_distance_monotone,
    type_subsets,
)
from rankflow.limit.field import LimitMeasure
from rankflow.model.assignment import make_assignment
from rankflow.simulation.engine import TaggedTrace, simulate
from rankflow.simulation.observables import Anchor, EmpiricalSnapshot
from rankflow.tagged.limit_path import TaggedPath


def initial_snapshot(model, N):
    assignment = make_assignment(model, N)
    return EmpiricalSnapshot(time=0.0, type_by_rank=assignment.type_of, A=model.A)


class TestTailMeasureDistance:
    """Tests for the certified sup distance."""

    def test_single_type_step_error(self, constant_field):
        N = 250
        snapshot = EmpiricalSnapshot(time=0.5, type_by_rank=np.zeros(N, dtype=np.int64), A=1)
        assert sup_distance_monotone(snapshot, constant_field, 0.5) == pytest.approx(1 / N, abs=1e-6)
        assert plain_grid_distance(snapshot, constant_field, 0.5) <= 1e-6

    def test_all_mass_on_one_type(self, two_constant_field):
        snapshot = EmpiricalSnapshot(time=0.0, type_by_rank=np.zeros(100, dtype=np.int64), A=2)
        assert sup_distance_monotone(snapshot, two_constant_field, 0.0) == pytest.approx(1.0, abs=1e-9)

    def test_quantile_start_is_close(self, two_constant_model, two_constant_field):
        N = 400
        snapshot = initial_snapshot(two_constant_model, N)
        assert sup_distance_monotone(snapshot, two_constant_field, 0.0) <= 2 * 2 / N

    def test_certified_bounds_plain(self, two_profile_model, two_profile_field):
        assignment = make_assignment(two_profile_model, 300)
        output = simulate(two_profile_model, assignment, 0.5, seed=8, snap_times=[0.25, 0.5])
        for snap in output.snapshots:
            certified = sup_distance_monotone(snap, two_profile_field, snap.time)
            assert certified >= plain_grid_distance(snap, two_profile_field, snap.time)
        assert distance_U(output, LimitMeasure(two_profile_field)) == pytest.approx(
            distance_U(output, two_profile_field)
        )
        assert 0.0 <= distance_U(output, two_profile_field) <= 2.0


class TestCharacteristicDistances:
    """Tests for D_Yc and the tagged-path distance."""

    def test_yc_distance_small_for_large_N(self, constant_model, constant_field):
        assignment = make_assignment(constant_model, 4000)
        output = simulate(
            constant_model, assignment, 1.0, seed=2,
            snap_times=np.linspace(0, 1, 5), anchors=[Anchor(0.0, 0.0), Anchor(0.5, 0.0)],
        )
        assert distance_Yc(output, constant_field) <= 0.05

    def test_yc_distance_empty(self, constant_model, constant_field):
        output = simulate(constant_model, make_assignment(constant_model, 10), 0.5, seed=1)
        assert distance_Yc(output, constant_field) == 0.0
        assert distance_U(output, constant_field) == 0.0

    def test_tagged_distance(self):
        trace = TaggedTrace(0, 3, 0, 0.5, changes=[(0.0, 0.5), (0.3, 0.0), (0.6, 0.1)])
        times = np.array([0.0, 0.25, 0.5, 0.75])
        path = TaggedPath(0, 0.5, times, np.array([0.5, 0.5, 0.0, 0.1]))
        assert distance_tagged(trace, path) == 0.0
        shifted = TaggedPath(0, 0.5, times, np.array([0.5, 0.6, 0.0, 0.1]))
        assert distance_tagged(trace, shifted) == pytest.approx(0.1)


class TestVelocityDistance:
    """Tests for the V^N versus V distance."""

    def test_type_subsets(self):
        assert type_subsets(1) == [(1.0,)]
        assert type_subsets(2) == [(0.0, 1.0), (1.0, 0.0), (1.0, 1.0)]
        assert len(type_subsets(3)) == 7

    def test_constant_rate_at_start(self, constant_model, constant_field):
        N = 200
        snapshot = initial_snapshot(constant_model, N)
        assert distance_V(snapshot, constant_model, constant_field) <= 1 / N + 1e-6

    def test_run_distance(self, two_profile_model, two_profile_field):
        output = simulate(
            two_profile_model, make_assignment(two_profile_model, 500), 1.0, seed=4,
            snap_times=[0.0, 0.5, 1.0],
        )
        value = distance_V_run(output, two_profile_model, two_profile_field)
        assert value == max(distance_V(s, two_profile_model, two_profile_field) for s in output.snapshots)
        assert value < 1.0
