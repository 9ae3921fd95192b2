"""
RANKFLOW Model Validation Module

Grid checks of every model invariant before simulation or solving.
Violations are reported as data with location and magnitude; nothing here
raises for a bad model.
"""

from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

import numpy as np
import structlog

from rankflow.errors import DomainError, NotDifferentiableError
from rankflow.model.spec import ModelSpec
from rankflow.ratelang import RateExpr

logger = structlog.get_logger()

VALIDATION_GRID = 401
SOLIDITY_TOL = 1e-9
BOUNDARY_TOL = 1e-9
SLOPE_TOL = 1e-12


class ValidationStatus(str, Enum):
    """Validation result status."""
    PASS = "pass"
    FAIL = "fail"


class ModelIssueCode(str, Enum):
    """Standardized codes for model invariant violations."""
    WEIGHT_NOT_POSITIVE = "WEIGHT_NOT_POSITIVE"
    WEIGHTS_NOT_NORMALIZED = "WEIGHTS_NOT_NORMALIZED"
    EXPR_DOMAIN = "EXPR_DOMAIN"
    RATE_NEGATIVE = "RATE_NEGATIVE"
    RATE_NOT_DIFFERENTIABLE = "RATE_NOT_DIFFERENTIABLE"
    PROFILE_TIME_DEPENDENT = "PROFILE_TIME_DEPENDENT"
    PROFILE_NOT_DIFFERENTIABLE = "PROFILE_NOT_DIFFERENTIABLE"
    PROFILE_START = "PROFILE_START"
    PROFILE_END = "PROFILE_END"
    PROFILE_INCREASING = "PROFILE_INCREASING"
    SOLIDITY = "SOLIDITY"


@dataclass
class ValidationIssue:
    """A single violated invariant with where and by how much."""
    code: ModelIssueCode
    message: str
    type_index: Optional[int] = None
    y: Optional[float] = None
    t: Optional[float] = None
    magnitude: Optional[float] = None
    remediation: Optional[str] = None

    def to_dict(self) -> dict:
        return {
            "code": self.code.value,
            "message": self.message,
            "type_index": self.type_index,
            "y": self.y,
            "t": self.t,
            "magnitude": self.magnitude,
            "remediation": self.remediation,
        }


@dataclass
class ValidationReport:
    """Complete validation result for a model."""
    status: ValidationStatus = ValidationStatus.PASS
    issues: list[ValidationIssue] = field(default_factory=list)
    metadata: dict = field(default_factory=dict)

    @property
    def accepted(self) -> bool:
        return not self.issues

    def add_issue(self, issue: ValidationIssue) -> None:
        self.issues.append(issue)
        self.status = ValidationStatus.FAIL

    def merge(self, other: "ValidationReport") -> None:
        for issue in other.issues:
            self.add_issue(issue)
        self.metadata.update(other.metadata)

    def to_dict(self) -> dict:
        return {
            "status": self.status.value,
            "accepted": self.accepted,
            "issues": [issue.to_dict() for issue in self.issues],
            "metadata": self.metadata,
        }


def _grid(horizon: float, n: int = VALIDATION_GRID) -> tuple[np.ndarray, np.ndarray]:
    return np.linspace(0.0, 1.0, n), np.linspace(0.0, horizon, n)


def _evaluate(
    expr: RateExpr, y, t, report: ValidationReport, index: int, what: str
) -> Optional[np.ndarray]:
    try:
        return expr.eval_grid(y, t)
    except DomainError as exc:
        report.add_issue(ValidationIssue(
            code=ModelIssueCode.EXPR_DOMAIN,
            message=f"{what} of type {index} is undefined: {exc.message}",
            type_index=index,
            y=exc.context.get("y"),
            t=exc.context.get("t"),
            remediation="Keep the expression finite on [0,1] x [0,T]",
        ))
        return None


class ModelValidator:
    """Runs all invariant checks on a parsed model."""

    def __init__(self, grid_points: int = VALIDATION_GRID):
        self.grid_points = grid_points

    def validate_weights(self, model: ModelSpec) -> ValidationReport:
        report = ValidationReport()
        for a, r in enumerate(model.weights):
            if not r > 0:
                report.add_issue(ValidationIssue(
                    code=ModelIssueCode.WEIGHT_NOT_POSITIVE,
                    message=f"Weight of type {a} is {r}, must be > 0",
                    type_index=a,
                    magnitude=float(r),
                ))
        total = float(sum(model.weights))
        if abs(total - 1.0) > SOLIDITY_TOL:
            report.add_issue(ValidationIssue(
                code=ModelIssueCode.WEIGHTS_NOT_NORMALIZED,
                message=f"Weights sum to {total}, expected 1",
                magnitude=abs(total - 1.0),
                remediation="Rescale the weights",
            ))
        return report

    def validate_rates(self, model: ModelSpec) -> ValidationReport:
        report = ValidationReport()
        ys, ts = _grid(model.horizon, self.grid_points)
        Y, T = np.meshgrid(ys, ts, indexing="ij")
        for a, w in enumerate(model.rates):
            if not w.differentiable:
                report.add_issue(ValidationIssue(
                    code=ModelIssueCode.RATE_NOT_DIFFERENTIABLE,
                    message=f"Rate of type {a} uses min/max; its y-derivative is required",
                    type_index=a,
                ))
            values = _evaluate(w, Y, T, report, a, "Rate")
            if values is None:
                continue
            if values.min() < 0.0:
                i, k = np.unravel_index(int(np.argmin(values)), values.shape)
                report.add_issue(ValidationIssue(
                    code=ModelIssueCode.RATE_NEGATIVE,
                    message=f"Rate of type {a} is negative",
                    type_index=a,
                    y=float(ys[i]),
                    t=float(ts[k]),
                    magnitude=float(-values[i, k]),
                ))
            if w.differentiable:
                try:
                    _evaluate(w.diff_y(), Y, T, report, a, "Rate slope")
                except NotDifferentiableError:
                    pass
        return report

    def validate_profiles(self, model: ModelSpec) -> ValidationReport:
        report = ValidationReport()
        ys, _ = _grid(model.horizon, self.grid_points)
        weighted_sum = np.zeros_like(ys)
        complete = True
        for a, (rho, r) in enumerate(zip(model.profiles, model.weights)):
            if "t" in rho.free_variables:
                report.add_issue(ValidationIssue(
                    code=ModelIssueCode.PROFILE_TIME_DEPENDENT,
                    message=f"Profile of type {a} depends on t",
                    type_index=a,
                    remediation="Initial profiles are functions of y only",
                ))
                complete = False
                continue
            values = _evaluate(rho, ys, 0.0, report, a, "Profile")
            if values is None:
                complete = False
                continue
            weighted_sum += r * values
            if abs(values[0] - 1.0) > BOUNDARY_TOL:
                report.add_issue(ValidationIssue(
                    code=ModelIssueCode.PROFILE_START,
                    message=f"Profile of type {a} has rho(0)={values[0]}, expected 1",
                    type_index=a, y=0.0, magnitude=abs(values[0] - 1.0),
                ))
            if abs(values[-1]) > BOUNDARY_TOL:
                report.add_issue(ValidationIssue(
                    code=ModelIssueCode.PROFILE_END,
                    message=f"Profile of type {a} has rho(1)={values[-1]}, expected 0",
                    type_index=a, y=1.0, magnitude=abs(values[-1]),
                ))
            if not rho.differentiable:
                report.add_issue(ValidationIssue(
                    code=ModelIssueCode.PROFILE_NOT_DIFFERENTIABLE,
                    message=f"Profile of type {a} uses min/max",
                    type_index=a,
                ))
                continue
            slope = _evaluate(rho.diff_y(), ys, 0.0, report, a, "Profile slope")
            if slope is not None and slope.max() > SLOPE_TOL:
                j = int(np.argmax(slope))
                report.add_issue(ValidationIssue(
                    code=ModelIssueCode.PROFILE_INCREASING,
                    message=f"Profile of type {a} increases",
                    type_index=a, y=float(ys[j]), magnitude=float(slope[j]),
                ))
        if complete:
            defect = np.abs(weighted_sum - (1.0 - ys))
            j = int(np.argmax(defect))
            if defect[j] > SOLIDITY_TOL:
                report.add_issue(ValidationIssue(
                    code=ModelIssueCode.SOLIDITY,
                    message="Weighted profiles do not sum to 1 - y",
                    y=float(ys[j]), magnitude=float(defect[j]),
                    remediation="Choose profiles with sum_a r_a rho_a(y) = 1 - y",
                ))
        return report


def validate_model(model: ModelSpec) -> ValidationReport:
    """
    Check every model invariant on the validation grid.

    Returns:
        ValidationReport; the model is accepted iff it lists no issue
    """
    validator = ModelValidator()
    report = ValidationReport(metadata={"types": model.A, "grid_points": VALIDATION_GRID})
    report.merge(validator.validate_weights(model))
    report.merge(validator.validate_rates(model))
    report.merge(validator.validate_profiles(model))
    logger.info(
        "Validated model",
        types=model.A,
        accepted=report.accepted,
        issues=len(report.issues),
    )
    return report
