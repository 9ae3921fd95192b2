"""
RANKFLOW Rate Expressions

`RateExpr` couples a parsed tree with compiled evaluators: a scalar one built on
`math` for the simulator's per-candidate acceptance test, and a numpy one for
grid work in validation and the limit solver.
"""

import math
from dataclasses import dataclass, field
from typing import Any, Callable, Union

import numpy as np

from rankflow.errors import DomainError
from rankflow.ratelang.calculus import derivative, serialize
from rankflow.ratelang.nodes import BinOp, Call, Clamp, Const, Neg, Node, Pow, Var, contains_clamp
from rankflow.ratelang.nodes import free_variables as _free_variables
from rankflow.ratelang.parser import parse_tree

ArrayLike = Union[float, np.ndarray]

_SCALAR_NAMESPACE: dict[str, Any] = {
    "exp": math.exp,
    "log": math.log,
    "sin": math.sin,
    "cos": math.cos,
    "pow": math.pow,
    "min": min,
    "max": max,
}

_ARRAY_NAMESPACE: dict[str, Any] = {
    "exp": np.exp,
    "log": np.log,
    "sin": np.sin,
    "cos": np.cos,
    "pow": np.power,
    "min": np.minimum,
    "max": np.maximum,
}


def _to_python(node: Node) -> str:
    """Python source for the tree; function names resolve in the chosen namespace."""
    if isinstance(node, Const):
        return repr(node.value)
    if isinstance(node, Var):
        return node.name
    if isinstance(node, Neg):
        return f"(-{_to_python(node.arg)})"
    if isinstance(node, Pow):
        return f"pow({_to_python(node.base)}, {node.exponent!r})"
    if isinstance(node, Call):
        return f"{node.func}({_to_python(node.arg)})"
    if isinstance(node, Clamp):
        return f"{node.func}({_to_python(node.left)}, {_to_python(node.right)})"
    assert isinstance(node, BinOp)
    return f"({_to_python(node.left)} {node.op} {_to_python(node.right)})"


def _compile(node: Node, namespace: dict[str, Any]) -> Callable:
    source = f"lambda y, t: {_to_python(node)}"
    return eval(compile(source, "<rate-expr>", "eval"), dict(namespace))


@dataclass(eq=False)
class RateExpr:
    """A parsed expression in y and t with cached evaluators."""

    tree: Node
    text: str = ""
    _scalar: Callable = field(default=None, init=False, repr=False)
    _array: Callable = field(default=None, init=False, repr=False)

    def __post_init__(self):
        if not self.text:
            self.text = serialize(self.tree)
        self._scalar = _compile(self.tree, _SCALAR_NAMESPACE)
        self._array = _compile(self.tree, _ARRAY_NAMESPACE)

    def __eq__(self, other: object) -> bool:
        return isinstance(other, RateExpr) and self.tree == other.tree

    def __hash__(self) -> int:
        return hash(self.tree)

    def __reduce__(self):
        # compiled lambdas do not pickle; rebuild them in the worker
        return (RateExpr, (self.tree, self.text))

    @property
    def free_variables(self) -> frozenset[str]:
        return _free_variables(self.tree)

    @property
    def is_constant(self) -> bool:
        return not self.free_variables

    @property
    def differentiable(self) -> bool:
        return not contains_clamp(self.tree)

    def eval(self, y: float, t: float) -> float:
        """Evaluate at one point; DomainError if the result is not finite."""
        try:
            value = self._scalar(y, t)
        except (ArithmeticError, ValueError) as exc:
            raise DomainError(
                f"{self.text} undefined at y={y}, t={t}: {exc}", y=y, t=t
            ) from None
        if not math.isfinite(value):
            raise DomainError(f"{self.text} is not finite at y={y}, t={t}", y=y, t=t)
        return float(value)

    def eval_grid(self, y: ArrayLike, t: ArrayLike) -> np.ndarray:
        """Evaluate with numpy broadcasting; the result has the broadcast shape."""
        y_arr = np.asarray(y, dtype=float)
        t_arr = np.asarray(t, dtype=float)
        shape = np.broadcast_shapes(y_arr.shape, t_arr.shape)
        with np.errstate(all="ignore"):
            values = np.broadcast_to(np.asarray(self._array(y_arr, t_arr), dtype=float), shape)
        bad = ~np.isfinite(values)
        if bad.any():
            index = np.unravel_index(int(np.argmax(bad)), shape) if shape else ()
            y_bad = float(np.broadcast_to(y_arr, shape)[index])
            t_bad = float(np.broadcast_to(t_arr, shape)[index])
            raise DomainError(
                f"{self.text} is not finite at y={y_bad}, t={t_bad}", y=y_bad, t=t_bad
            )
        return np.array(values, dtype=float)

    def diff_y(self) -> "RateExpr":
        return RateExpr(derivative(self.tree, "y"))

    def diff_t(self) -> "RateExpr":
        return RateExpr(derivative(self.tree, "t"))

    def serialize(self) -> str:
        return serialize(self.tree)


def parse_expr(text: str) -> RateExpr:
    """Parse rate/profile text; see rankflow.ratelang.parser for the grammar."""
    return RateExpr(parse_tree(text), text)
