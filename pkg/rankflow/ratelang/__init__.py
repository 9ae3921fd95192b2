"""
RANKFLOW Expression Language

Closed-form rates w(y, t) and profiles rho(y) over the variables y and t.
"""

from rankflow.ratelang.expr import RateExpr, parse_expr


def evaluate(expr: RateExpr, y: float, t: float) -> float:
    return expr.eval(y, t)


def diff_y(expr: RateExpr) -> RateExpr:
    return expr.diff_y()


def diff_t(expr: RateExpr) -> RateExpr:
    return expr.diff_t()


def serialize(expr: RateExpr) -> str:
    return expr.serialize()


__all__ = ["RateExpr", "parse_expr", "evaluate", "diff_y", "diff_t", "serialize"]
