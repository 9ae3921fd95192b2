"""
Tests for the hydrodynamic limit solver and field evaluators.
"""

import math
import pickle

import numpy as np
import pytest
from scipy.integrate import trapezoid

from rankflow.config import SolverSettings
from rankflow.errors import NonContractionError, OutOfDomainError
from rankflow.limit.field import LimitMeasure, U_of, V_of, invert_characteristics, phi, y_C
from rankflow.limit.solver import _ContractionMonitor, solve_f, solve_field, solve_g_eta
from rankflow.model.spec import load_model
from rankflow.simulation.observables import Anchor
from tests.conftest import SPACE_TIME, TWO_PROFILE, model_dict

LN2 = math.log(2)


def assert_contracts(diffs, ratio=0.6, start=5, floor=1e-13):
    """Successive sup-differences shrink by ratio from sweep start on, until round-off."""
    for k in range(start, len(diffs) - 1):
        if diffs[k] > floor and diffs[k + 1] > floor:
            assert diffs[k + 1] <= ratio * diffs[k], f"sweep {k + 1}: {diffs[k + 1]} vs {diffs[k]}"


class TestConstantRate:
    """A=1, w = 1, rho = 1 - y: every object has a closed form."""

    def test_f_closed_form(self, constant_field):
        Y, T = np.meshgrid(constant_field.ys, constant_field.ts, indexing="ij")
        assert np.abs(constant_field.f - (1 - (1 - Y) * np.exp(-T))).max() <= 1e-3

    def test_characteristic_from_origin(self, constant_field):
        assert y_C(constant_field, Anchor(0.0, 0.0), LN2) == pytest.approx(0.5, abs=1e-3)

    def test_g_closed_form(self, constant_field):
        S, T = np.meshgrid(constant_field.ts, constant_field.ts, indexing="ij")
        upper = S <= T
        expected = 1 - np.exp(-(T - S))
        assert np.abs(constant_field.g[upper] - expected[upper]).max() <= 1e-3
        assert constant_field.g[0, 277] == pytest.approx(constant_field.f[0, 277], abs=1e-3)

    def test_eta_is_one(self, constant_field):
        assert np.abs(constant_field.eta[0] - 1.0).max() <= 1e-3

    def test_identity_defect(self, constant_field):
        assert max(constant_field.identity_defect()) <= 1e-6

    def test_velocity_is_tail_mass(self, constant_field):
        ys = np.linspace(0, 1, 11)
        assert np.allclose(constant_field.V_many([1.0], ys, 0.6), 1 - ys, atol=1e-6)

    def test_converges_immediately(self, constant_field):
        assert len(constant_field.diagnostics.f_diffs) <= 3


class TestFieldInvariants:
    """Structural properties that hold for every accepted model."""

    @pytest.fixture(params=["two_profile", "two_constant"])
    def field(self, request, two_profile_field, two_constant_field):
        return {"two_profile": two_profile_field, "two_constant": two_constant_field}[request.param]

    def test_ranges(self, field):
        assert field.f.min() >= 0.0 and field.f.max() <= 1.0
        assert field.g.min() >= 0.0 and field.g.max() <= 1.0
        assert field.eta.min() >= 0.0

    def test_initial_column(self, field):
        assert np.array_equal(field.f[:, 0], field.ys)

    def test_f_monotone(self, field):
        assert np.all(np.diff(field.f, axis=0) > 0)
        assert np.all(np.diff(field.f, axis=1) >= -1e-12)

    def test_g_monotone(self, field):
        K = field.K
        assert np.all(np.diag(field.g) == 0.0)
        for k in range(1, K + 1, 17):
            column = field.g[: k + 1, k]
            assert np.all(np.diff(column) <= 1e-12)
        for i in range(0, K, 17):
            row = field.g[i, i:]
            assert np.all(np.diff(row) >= -1e-12)

    def test_g_meets_f_at_origin(self, field):
        assert np.abs(field.g[0] - field.f[0]).max() <= 1e-3

    def test_initial_measure(self, field):
        ys = field.ys
        U0 = field.U_many(ys, 0.0)
        for a, (r, rho) in enumerate(zip(field.model.weights, field.model.profiles)):
            assert np.allclose(U0[a], r * rho.eval_grid(ys, 0.0), atol=1e-9)

    def test_measure_monotone_in_y(self, field):
        ys = np.linspace(0, 1, 301)
        for t in (0.1, 0.5, 1.0):
            U = field.U_many(ys, t)
            assert U.min() >= 0.0 and U.max() <= 1.0
            assert np.all(np.diff(U, axis=1) <= 1e-9)

    def test_solidity(self, field):
        assert field.solidity_defect() <= 1e-2
        measure = LimitMeasure(field)
        assert measure.total(0.37, 0.81) == pytest.approx(0.63, abs=1e-2)


class TestTwoTypeDecay:
    """Constant w = (1, 2): mass on initial characteristics decays like exp(-w t)."""

    def test_decay_along_characteristics(self, two_constant_field):
        worst = 0.0
        for y0 in np.linspace(0, 0.95, 20):
            for t in np.linspace(0, 1, 11):
                y = y_C(two_constant_field, Anchor(float(y0), 0.0), float(t))
                for a, w in enumerate((1.0, 2.0)):
                    expected = 0.5 * (1 - y0) * math.exp(-w * t)
                    worst = max(worst, abs(U_of(two_constant_field, a, y, float(t)) - expected))
        assert worst <= 2e-3

    def test_phi_on_initial_line(self, two_constant_field):
        value = phi(two_constant_field, 1, Anchor(0.4, 0.0), 0.5)
        assert value == pytest.approx(0.5 * 0.6 * math.exp(-1.0), abs=1e-3)

    def test_phi_on_left_boundary_sums_to_tail(self, two_constant_field):
        anchor = Anchor(0.0, 0.3)
        y = y_C(two_constant_field, anchor, 0.8)
        total = sum(phi(two_constant_field, a, anchor, 0.8) for a in range(2))
        assert total == pytest.approx(1 - y, abs=1e-3)

    def test_velocity_weights(self, two_constant_field):
        # V(h, 0, t) = sum_a h_a w_a U_a(0, t) for constant rates
        U = two_constant_field.U_many([0.0], 0.4)[:, 0]
        value = V_of(two_constant_field, [1.0, 0.0], 0.0, 0.4)
        assert value == pytest.approx(U[0], abs=1e-6)
        value = V_of(two_constant_field, [0.0, 1.0], 0.0, 0.4)
        assert value == pytest.approx(2 * U[1], abs=1e-6)


class TestCharacteristics:
    """Tests for y_C and its inverse."""

    def test_start_points(self, two_profile_field):
        assert y_C(two_profile_field, Anchor(0.3, 0.0), 0.0) == pytest.approx(0.3)
        assert y_C(two_profile_field, Anchor(0.0, 0.5), 0.5) == 0.0

    @pytest.mark.parametrize("anchor", [Anchor(0.3, 0.0), Anchor(0.0, 0.2), Anchor(0.8, 0.0)])
    def test_inverse_round_trip(self, two_profile_field, anchor):
        y = y_C(two_profile_field, anchor, 0.7)
        found = invert_characteristics(two_profile_field, y, 0.7)
        assert found.y0 == pytest.approx(anchor.y0, abs=1e-3)
        assert found.t0 == pytest.approx(anchor.t0, abs=1e-3)

    def test_inverse_at_origin(self, two_profile_field):
        found = invert_characteristics(two_profile_field, 0.0, 0.6)
        assert found.y0 == 0.0
        assert found.t0 == pytest.approx(0.6, abs=1e-9)

    def test_inverse_at_time_zero(self, two_profile_field):
        found = invert_characteristics(two_profile_field, 0.42, 0.0)
        assert found.y0 == pytest.approx(0.42, abs=1e-12)
        assert found.t0 == 0.0

    def test_out_of_domain(self, two_profile_field):
        with pytest.raises(OutOfDomainError):
            y_C(two_profile_field, Anchor(0.0, 0.0), 1.5)
        with pytest.raises(OutOfDomainError):
            invert_characteristics(two_profile_field, 1.2, 0.5)
        with pytest.raises(OutOfDomainError):
            y_C(two_profile_field, Anchor(0.2, 0.2), 0.5)
        with pytest.raises(OutOfDomainError):
            y_C(two_profile_field, Anchor(0.0, 0.6), 0.5)


class TestSolver:
    """Tests for the fixed-point iterations."""

    def test_solve_f_shape(self, space_time_model, solver_settings):
        f = solve_f(space_time_model, 50, 40, solver_settings)
        assert f.shape == (51, 41)

    def test_solve_g_eta_shapes(self, space_time_model, solver_settings):
        f = solve_f(space_time_model, 50, 40, solver_settings)
        g, eta = solve_g_eta(space_time_model, f, 50, 40, solver_settings)
        assert g.shape == (41, 41)
        assert eta.shape == (1, 41)
        assert np.all(np.tril(g, -1) == 0.0)

    @pytest.mark.parametrize("data", [SPACE_TIME, TWO_PROFILE], ids=["space_time", "two_profile"])
    def test_f_contraction(self, data, solver_settings):
        field = solve_field(load_model(data), 100, 100, solver_settings)
        assert_contracts(field.diagnostics.f_diffs)

    @pytest.mark.parametrize("data", [SPACE_TIME, TWO_PROFILE], ids=["space_time", "two_profile"])
    def test_g_contraction(self, data, solver_settings):
        field = solve_field(load_model(data), 100, 100, solver_settings)
        diffs = field.diagnostics.g_diffs
        assert diffs[-1] < solver_settings.g_tol
        assert len(diffs) < solver_settings.max_iterations
        assert_contracts(diffs)

    @pytest.mark.parametrize("data", [SPACE_TIME, TWO_PROFILE], ids=["space_time", "two_profile"])
    def test_eta_contraction_per_sweep(self, data, solver_settings):
        field = solve_field(load_model(data), 100, 100, solver_settings)
        eta_diffs = field.diagnostics.eta_diffs
        assert len(eta_diffs) == field.model.A
        for sweeps in eta_diffs:
            assert len(sweeps) == len(field.diagnostics.g_diffs)
            for history in sweeps:
                assert_contracts(history)
        iterations = field.diagnostics.to_dict()["eta_iterations"]
        assert iterations == [[len(h) for h in sweeps] for sweeps in eta_diffs]

    @pytest.mark.parametrize("data", [SPACE_TIME, TWO_PROFILE], ids=["space_time", "two_profile"])
    def test_grid_refinement(self, data):
        settings = SolverSettings()
        coarse = solve_field(load_model(data), 50, 50, settings)
        fine = solve_field(load_model(data), 100, 100, settings)
        assert max(coarse.identity_defect()) >= 1.8 * max(fine.identity_defect())
        assert coarse.solidity_defect() >= 1.8 * fine.solidity_defect()

    def test_space_time_identity(self):
        field = solve_field(load_model(SPACE_TIME), 400, 400, SolverSettings())
        assert max(field.identity_defect()) <= 1e-6

    def test_full_grid_solidity(self, fine_field):
        field = fine_field
        assert field.solidity_defect() <= 1e-2
        assert max(field.identity_defect()) <= 1e-6

    def test_zero_rate(self, solver_settings):
        field = solve_field(load_model(model_dict([("0", "1-y", 1.0)])), 40, 40, solver_settings)
        assert np.allclose(field.f, field.ys[:, None])
        assert np.all(field.eta == 0.0)
        assert field.solidity_defect() <= 1e-12

    def test_sweep_cap_warns(self, space_time_model):
        settings = SolverSettings(grid_m=20, grid_k=20, max_iterations=1)
        f = solve_f(space_time_model, 20, 20, settings)
        assert f.shape == (21, 21)

    def test_stall_raises(self):
        monitor = _ContractionMonitor("g", stall_limit=3)
        monitor.record(1.0, 1.0)
        monitor.record(0.5, 0.5)
        monitor.record(0.6, 0.6)
        monitor.record(0.7, 0.7)
        with pytest.raises(NonContractionError) as exc:
            monitor.record(0.8, 0.8)
        assert exc.value.stage == "g"
        assert exc.value.history == [1.0, 0.5, 0.6, 0.7, 0.8]
        assert exc.value.exit_code == 3

    def test_stall_counter_resets(self):
        monitor = _ContractionMonitor("f", stall_limit=2)
        for value in (1.0, 1.1, 0.5, 0.6, 0.3):
            monitor.record(value, value)
        assert len(monitor.plain) == 5

    def test_grid_too_small(self, space_time_model, solver_settings):
        with pytest.raises(ValueError):
            solve_f(space_time_model, 1, 10, solver_settings)

    def test_field_pickles(self, two_profile_field):
        two_profile_field.V([1.0, 1.0], 0.2, 0.3)
        restored = pickle.loads(pickle.dumps(two_profile_field))
        assert len(restored._velocity_cache) == 0
        assert np.array_equal(restored.g, two_profile_field.g)
        assert restored.U(1, 0.3, 0.4) == two_profile_field.U(1, 0.3, 0.4)


@pytest.fixture(scope="module")
def fine_field():
    return solve_field(load_model(TWO_PROFILE), 400, 400, SolverSettings())


class TestCharacteristicDynamics:
    """Characteristics move with V(1, y, t) and carry mass by evaporation."""

    @pytest.mark.parametrize("y0", [0.2, 0.5, 0.8])
    def test_speed_is_velocity(self, fine_field, y0):
        dt = fine_field.ts[1] - fine_field.ts[0]
        anchor = Anchor(y0, 0.0)
        for k in range(20, fine_field.K - 1, 40):
            t = float(fine_field.ts[k])
            speed = (y_C(fine_field, anchor, t + dt) - y_C(fine_field, anchor, t - dt)) / (2 * dt)
            assert speed == pytest.approx(
                V_of(fine_field, [1.0, 1.0], y_C(fine_field, anchor, t), t), abs=1e-4
            )

    @pytest.mark.parametrize("anchor", [Anchor(0.3, 0.0), Anchor(0.0, 0.25)])
    def test_duality(self, fine_field, anchor):
        for t in (0.3, 0.6, 1.0):
            mass = sum(phi(fine_field, a, anchor, t) for a in range(2))
            assert y_C(fine_field, anchor, t) == pytest.approx(1 - mass, abs=1e-4)

    def test_inverse_consistency(self, fine_field):
        for t in (0.25, 0.5, 0.75):
            for y in np.linspace(0, 0.95, 20):
                anchor = invert_characteristics(fine_field, float(y), t)
                assert y_C(fine_field, anchor, t) == pytest.approx(y, abs=2 / fine_field.M)

    @pytest.mark.parametrize("a", [0, 1])
    def test_balance_along_characteristic(self, fine_field, a):
        anchor = Anchor(0.4, 0.0)
        h = [0.0, 0.0]
        h[a] = 1.0
        ts = fine_field.ts
        path = [y_C(fine_field, anchor, float(t)) for t in ts]
        evaporated = trapezoid([V_of(fine_field, h, y, float(t)) for y, t in zip(path, ts)], ts)
        start = U_of(fine_field, a, 0.4, 0.0)
        end = U_of(fine_field, a, path[-1], float(ts[-1]))
        assert end - start + evaporated == pytest.approx(0.0, abs=1e-3)

    @pytest.mark.parametrize("t", [0.0, 0.35, 1.0])
    def test_velocity_tail_integral(self, fine_field, t):
        # type 0 has dw/dy = exp(-t); integrate its tail on a finer y grid
        model = fine_field.model
        h = [1.0, 0.5]
        zs = np.linspace(0, 1, 4001)
        U = fine_field.U_many(zs, t)
        local = sum(h[a] * model.rates[a].eval_grid(zs, t) * U[a] for a in range(2))
        slope = sum(h[a] * model.rate_slopes[a].eval_grid(zs, t) * U[a] for a in range(2))
        for y in (0.0, 0.13, 0.5, 0.77, 1.0):
            tail = zs >= y
            expected = np.interp(y, zs, local) + trapezoid(slope[tail], zs[tail])
            assert V_of(fine_field, h, y, t) == pytest.approx(expected, abs=1e-4)
