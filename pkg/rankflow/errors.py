"""
RANKFLOW Error Types

Every failure the library can raise carries a standardized code and maps to a
deterministic CLI exit status.
"""

from enum import Enum
from typing import Any, Optional


class ErrorCode(str, Enum):
    """Standardized error codes."""
    # Expression language
    EXPR_SYNTAX = "EXPR_SYNTAX"
    EXPR_UNKNOWN_IDENTIFIER = "EXPR_UNKNOWN_IDENTIFIER"
    EXPR_DOMAIN = "EXPR_DOMAIN"
    EXPR_NOT_DIFFERENTIABLE = "EXPR_NOT_DIFFERENTIABLE"

    # Model and inputs
    MODEL_INVALID = "MODEL_INVALID"
    ASSIGNMENT_INFEASIBLE = "ASSIGNMENT_INFEASIBLE"
    ANCHOR_INVALID = "ANCHOR_INVALID"
    ANCHOR_UNKNOWN = "ANCHOR_UNKNOWN"
    CONFIG_INVALID = "CONFIG_INVALID"

    # Numerics
    NON_CONTRACTION = "NON_CONTRACTION"
    OUT_OF_DOMAIN = "OUT_OF_DOMAIN"

    # Files
    IO_FAILURE = "IO_FAILURE"


EXIT_VALIDATION = 2
EXIT_NUMERICAL = 3
EXIT_IO = 4

_EXIT_CODES = {
    ErrorCode.NON_CONTRACTION: EXIT_NUMERICAL,
    ErrorCode.OUT_OF_DOMAIN: EXIT_NUMERICAL,
    ErrorCode.IO_FAILURE: EXIT_IO,
}


class RankflowError(Exception):
    """Base class for all rankflow errors."""

    code: ErrorCode = ErrorCode.MODEL_INVALID

    def __init__(self, message: str, **context: Any):
        super().__init__(message)
        self.message = message
        self.context = context

    @property
    def exit_code(self) -> int:
        return _EXIT_CODES.get(self.code, EXIT_VALIDATION)

    def to_dict(self) -> dict:
        return {
            "code": self.code.value,
            "message": self.message,
            "context": {k: v for k, v in self.context.items() if v is not None},
        }


class ExprSyntaxError(RankflowError):
    """Malformed rate/profile expression; `offset` is the byte offset of the fault."""

    code = ErrorCode.EXPR_SYNTAX

    def __init__(self, message: str, offset: int, text: Optional[str] = None):
        super().__init__(f"{message} at offset {offset}", offset=offset, text=text)
        self.offset = offset


class UnknownIdentifierError(RankflowError):
    code = ErrorCode.EXPR_UNKNOWN_IDENTIFIER

    def __init__(self, name: str, offset: int):
        super().__init__(f"Unknown identifier '{name}' at offset {offset}", name=name, offset=offset)
        self.name = name
        self.offset = offset


class DomainError(RankflowError):
    """Expression evaluated to NaN or infinity."""

    code = ErrorCode.EXPR_DOMAIN


class NotDifferentiableError(RankflowError):
    code = ErrorCode.EXPR_NOT_DIFFERENTIABLE


class ModelValidationError(RankflowError):
    """Raised by callers that require a valid model; carries the full report."""

    code = ErrorCode.MODEL_INVALID

    def __init__(self, message: str, report: Any = None):
        super().__init__(message)
        self.report = report

    def to_dict(self) -> dict:
        data = super().to_dict()
        if self.report is not None:
            data["report"] = self.report.to_dict()
        return data


class InfeasibleAssignmentError(RankflowError):
    code = ErrorCode.ASSIGNMENT_INFEASIBLE


class InvalidAnchorError(RankflowError):
    code = ErrorCode.ANCHOR_INVALID


class UnknownAnchorError(RankflowError):
    code = ErrorCode.ANCHOR_UNKNOWN


class ConfigError(RankflowError):
    code = ErrorCode.CONFIG_INVALID


class NonContractionError(RankflowError):
    """Fixed-point iteration stopped shrinking its successive differences."""

    code = ErrorCode.NON_CONTRACTION

    def __init__(self, message: str, stage: str, history: Optional[list[float]] = None):
        super().__init__(message, stage=stage, history=history)
        self.stage = stage
        self.history = history or []


class OutOfDomainError(RankflowError):
    code = ErrorCode.OUT_OF_DOMAIN


class OutputError(RankflowError):
    code = ErrorCode.IO_FAILURE
