"""
Tests for model files, validation, the rate bound and initial assignment.
"""

import json

import numpy as np
import pydantic
import pytest

from rankflow.errors import InfeasibleAssignmentError
from rankflow.model.assignment import AssignmentMode, TypeAssignment, make_assignment
from rankflow.model.bounds import rate_bound
from rankflow.model.spec import load_model, model_hash
from rankflow.validators.model_checks import ModelIssueCode, ValidationStatus, validate_model
from tests.conftest import TWO_PROFILE, model_dict


class TestModelFile:
    """Tests for the model file codec."""

    def test_load_from_path(self, test_data_dir):
        model = load_model(test_data_dir / "models" / "two_profile.json")
        assert model.A == 2
        assert model.weights == [0.5, 0.5]
        assert model.horizon == 1.0

    def test_load_from_json_text(self):
        model = load_model(json.dumps(TWO_PROFILE))
        assert model.A == 2

    def test_unknown_field_rejected(self):
        data = model_dict([("1.0", "1-y", 1.0)])
        data["extra"] = 1
        with pytest.raises(pydantic.ValidationError):
            load_model(data)

    def test_empty_types_rejected(self):
        with pytest.raises(pydantic.ValidationError):
            load_model({"types": [], "horizon": 1.0})

    def test_hash_ignores_formatting(self):
        a = load_model(model_dict([("exp(-t)*(1+y)", "1-y", 1.0)]))
        b = load_model(model_dict([("exp( -t ) * ( 1 + y )", "1 - y", 1.0)]))
        assert model_hash(a) == model_hash(b)

    def test_hash_depends_on_horizon(self):
        a = load_model(model_dict([("1.0", "1-y", 1.0)], horizon=1.0))
        b = load_model(model_dict([("1.0", "1-y", 1.0)], horizon=2.0))
        assert model_hash(a) != model_hash(b)


class TestValidateModel:
    """Tests for model acceptance."""

    def test_identity_profile_accepted(self, constant_model):
        report = validate_model(constant_model)
        assert report.accepted
        assert report.status == ValidationStatus.PASS

    def test_two_profile_accepted(self, two_profile_model):
        assert validate_model(two_profile_model).accepted

    def test_profile_end_rejected(self):
        report = validate_model(load_model(model_dict([("1.0", "1-0.9*y", 1.0)])))
        assert not report.accepted
        codes = {issue.code for issue in report.issues}
        assert ModelIssueCode.PROFILE_END in codes
        end = next(i for i in report.issues if i.code == ModelIssueCode.PROFILE_END)
        assert end.type_index == 0
        assert end.magnitude == pytest.approx(0.1)

    def test_negative_rate(self):
        report = validate_model(load_model(model_dict([("y - 0.5", "1-y", 1.0)])))
        issue = next(i for i in report.issues if i.code == ModelIssueCode.RATE_NEGATIVE)
        assert issue.y == 0.0
        assert issue.magnitude == pytest.approx(0.5)

    def test_weights_must_sum_to_one(self):
        report = validate_model(
            load_model(model_dict([("1.0", "1-y", 0.6), ("1.0", "1-y", 0.6)]))
        )
        assert ModelIssueCode.WEIGHTS_NOT_NORMALIZED in {i.code for i in report.issues}

    def test_time_dependent_profile(self):
        report = validate_model(load_model(model_dict([("1.0", "(1-y)*exp(-t)", 1.0)])))
        assert ModelIssueCode.PROFILE_TIME_DEPENDENT in {i.code for i in report.issues}

    def test_solidity_violation(self):
        report = validate_model(
            load_model(model_dict([("1.0", "1-y", 0.5), ("1.0", "(1-y)*(1-y)", 0.5)]))
        )
        assert ModelIssueCode.SOLIDITY in {i.code for i in report.issues}

    def test_undefined_rate_is_reported(self):
        report = validate_model(load_model(model_dict([("log(y)", "1-y", 1.0)])))
        assert ModelIssueCode.EXPR_DOMAIN in {i.code for i in report.issues}

    def test_clamped_rate_rejected(self):
        report = validate_model(load_model(model_dict([("max(y, 0.5)", "1-y", 1.0)])))
        assert ModelIssueCode.RATE_NOT_DIFFERENTIABLE in {i.code for i in report.issues}

    def test_report_serializes(self):
        report = validate_model(load_model(model_dict([("1.0", "1-0.9*y", 1.0)])))
        data = report.to_dict()
        assert data["accepted"] is False
        assert data["issues"][0]["code"] == "PROFILE_END"


class TestRateBound:
    """Tests for the certified rate bound."""

    def test_constant(self):
        model = load_model(model_dict([("2.0", "1-y", 1.0)], horizon=3.0))
        assert rate_bound(model) == 2.0
        assert model.rate_bound == 2.0

    def test_linear(self):
        assert rate_bound(load_model(model_dict([("1+y", "1-y", 1.0)]))) == pytest.approx(2.0)

    def test_space_time(self, space_time_model):
        R = rate_bound(space_time_model)
        assert 2.0 <= R <= 2.0 + 1e-4

    def test_slope_dominates(self):
        model = load_model(model_dict([("0.1 + 3*y*y", "1-y", 1.0)]))
        # sup |w_y| = 6 at y = 1
        assert rate_bound(model) >= 6.0

    def test_upper_bound_on_random_points(self, two_profile_model):
        R = rate_bound(two_profile_model)
        rng = np.random.default_rng(5)
        y = rng.uniform(0, 1, 1_000_000)
        t = rng.uniform(0, two_profile_model.horizon, 1_000_000)
        for w, slope in zip(two_profile_model.rates, two_profile_model.rate_slopes):
            assert w.eval_grid(y, t).max() <= R
            assert np.abs(slope.eval_grid(y, t)).max() <= R

    @pytest.mark.parametrize("rate,sup", [("1+y^1.5", 2.0), ("y^2.5", 2.5), ("1+t^1.5", 2.0)])
    def test_c1_rates_with_singular_curvature(self, rate, sup):
        model = load_model(model_dict([(rate, "1-y", 1.0)]))
        assert validate_model(model).accepted
        R = rate_bound(model)
        assert sup <= R <= sup + 1e-2
        rng = np.random.default_rng(11)
        y = rng.uniform(0, 1, 200_000)
        t = rng.uniform(0, model.horizon, 200_000)
        assert model.rates[0].eval_grid(y, t).max() <= R
        assert np.abs(model.rate_slopes[0].eval_grid(y, t)).max() <= R

    def test_require_rate_bound_computes_once(self, constant_model):
        assert constant_model.rate_bound is None
        assert constant_model.require_rate_bound() == 1.0
        assert constant_model.rate_bound == 1.0


class TestMakeAssignment:
    """Tests for initial type assignment."""

    def test_single_type(self, constant_model):
        assignment = make_assignment(constant_model, 7)
        assert np.all(assignment.type_of == 0)
        assert np.array_equal(assignment.initial_rank, np.arange(1, 8))

    def test_two_types_interleave(self):
        model = load_model(model_dict([("1.0", "1-y", 0.5), ("1.0", "1-y", 0.5)]))
        assignment = make_assignment(model, 4, AssignmentMode.QUANTILE)
        by_rank = assignment.type_of[np.argsort(assignment.initial_rank)]
        assert by_rank.tolist() == [0, 1, 0, 1]

    def test_quantile_deviation(self, two_profile_model):
        N = 1000
        assignment = make_assignment(two_profile_model, N, AssignmentMode.QUANTILE)
        tails = assignment.tail_counts(2) / N
        ys = np.arange(N + 1) / N
        for a, (r, rho) in enumerate(zip(two_profile_model.weights, two_profile_model.profiles)):
            assert np.abs(tails[a] - r * rho.eval_grid(ys, 0.0)).max() <= 2 / N

    def test_iid_is_seeded(self, two_profile_model):
        a = make_assignment(two_profile_model, 500, AssignmentMode.IID, seed=4)
        b = make_assignment(two_profile_model, 500, AssignmentMode.IID, seed=4)
        c = make_assignment(two_profile_model, 500, AssignmentMode.IID, seed=5)
        assert np.array_equal(a.type_of, b.type_of)
        assert not np.array_equal(a.type_of, c.type_of)

    def test_iid_follows_profiles(self, two_profile_model):
        N = 20000
        assignment = make_assignment(two_profile_model, N, AssignmentMode.IID, seed=1)
        tails = assignment.tail_counts(2) / N
        # r_0 (rho_0(0) - rho_0(1/2)) = 0.5 * (1 - 1/4)
        assert tails[0, 0] - tails[0, N // 2] == pytest.approx(0.375, abs=0.02)

    def test_infeasible_profiles(self):
        # weights that cannot be realized at the back of the ranking
        model = load_model(model_dict([("1.0", "1-y", 0.5), ("1.0", "1-y*y*y*y*y*y*y*y", 0.5)]))
        with pytest.raises(InfeasibleAssignmentError):
            make_assignment(model, 50)

    def test_rank_permutation_enforced(self):
        with pytest.raises(ValueError):
            TypeAssignment(N=3, type_of=np.zeros(3), initial_rank=np.array([1, 1, 3]))
