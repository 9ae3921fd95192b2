"""
RANKFLOW Symbolic Calculus

Constant folding, simplification, symbolic differentiation and serialization
on the expression tree.
"""

import math
from typing import Optional

from rankflow.errors import NotDifferentiableError
from rankflow.ratelang.nodes import BinOp, Call, Clamp, Const, Neg, Node, Pow, Var

_SCALAR_FUNCS = {"exp": math.exp, "log": math.log, "sin": math.sin, "cos": math.cos}

ZERO = Const(0.0)
ONE = Const(1.0)


def fold_constant(node: Node) -> Optional[float]:
    """Value of a variable-free subtree, or None when it is not foldable."""
    try:
        if isinstance(node, Const):
            return node.value
        if isinstance(node, Var):
            return None
        if isinstance(node, Neg):
            inner = fold_constant(node.arg)
            return None if inner is None else -inner
        if isinstance(node, Pow):
            base = fold_constant(node.base)
            return None if base is None else math.pow(base, node.exponent)
        if isinstance(node, Call):
            inner = fold_constant(node.arg)
            return None if inner is None else _SCALAR_FUNCS[node.func](inner)
        left = fold_constant(node.left)
        right = fold_constant(node.right)
        if left is None or right is None:
            return None
        if isinstance(node, Clamp):
            return min(left, right) if node.func == "min" else max(left, right)
        if node.op == "+":
            return left + right
        if node.op == "-":
            return left - right
        if node.op == "*":
            return left * right
        return left / right
    except (ArithmeticError, ValueError):
        return None


def _is(node: Node, value: float) -> bool:
    return isinstance(node, Const) and node.value == value


def simplify(node: Node) -> Node:
    """Fold constants and drop neutral elements bottom-up."""
    if isinstance(node, (Const, Var)):
        return node
    if isinstance(node, Neg):
        arg = simplify(node.arg)
        if isinstance(arg, Const):
            return Const(-arg.value)
        if isinstance(arg, Neg):
            return arg.arg
        return Neg(arg)
    if isinstance(node, Pow):
        base = simplify(node.base)
        if node.exponent == 1.0:
            return base
        if node.exponent == 0.0:
            return ONE
        folded = Pow(base, node.exponent)
        value = fold_constant(folded)
        return Const(value) if value is not None and math.isfinite(value) else folded
    if isinstance(node, Call):
        arg = simplify(node.arg)
        folded = Call(node.func, arg)
        value = fold_constant(folded)
        return Const(value) if value is not None and math.isfinite(value) else folded

    left = simplify(node.left)
    right = simplify(node.right)
    if isinstance(node, Clamp):
        folded = Clamp(node.func, left, right)
        value = fold_constant(folded)
        return Const(value) if value is not None else folded

    if isinstance(left, Const) and isinstance(right, Const):
        value = fold_constant(BinOp(node.op, left, right))
        if value is not None and math.isfinite(value):
            return Const(value)
    op = node.op
    if op == "+":
        if _is(left, 0.0):
            return right
        if _is(right, 0.0):
            return left
    elif op == "-":
        if _is(right, 0.0):
            return left
        if _is(left, 0.0):
            return simplify(Neg(right))
    elif op == "*":
        if _is(left, 0.0) or _is(right, 0.0):
            return ZERO
        if _is(left, 1.0):
            return right
        if _is(right, 1.0):
            return left
        if _is(left, -1.0):
            return simplify(Neg(right))
        if _is(right, -1.0):
            return simplify(Neg(left))
    elif op == "/":
        if _is(right, 1.0):
            return left
        if _is(left, 0.0) and not _is(right, 0.0):
            return ZERO
    return BinOp(op, left, right)


def _derive(node: Node, var: str) -> Node:
    if isinstance(node, Const):
        return ZERO
    if isinstance(node, Var):
        return ONE if node.name == var else ZERO
    if isinstance(node, Neg):
        return Neg(_derive(node.arg, var))
    if isinstance(node, Clamp):
        raise NotDifferentiableError(
            f"{node.func}() is not differentiable", expression=serialize(node)
        )
    if isinstance(node, Pow):
        # d(u^c) = c * u^(c-1) * du
        inner = _derive(node.base, var)
        return BinOp(
            "*", BinOp("*", Const(node.exponent), Pow(node.base, node.exponent - 1.0)), inner
        )
    if isinstance(node, Call):
        inner = _derive(node.arg, var)
        if node.func == "exp":
            outer: Node = node
        elif node.func == "log":
            return BinOp("/", inner, node.arg)
        elif node.func == "sin":
            outer = Call("cos", node.arg)
        else:
            outer = Neg(Call("sin", node.arg))
        return BinOp("*", outer, inner)

    dl = _derive(node.left, var)
    dr = _derive(node.right, var)
    if node.op in ("+", "-"):
        return BinOp(node.op, dl, dr)
    if node.op == "*":
        return BinOp("+", BinOp("*", dl, node.right), BinOp("*", node.left, dr))
    numerator = BinOp("-", BinOp("*", dl, node.right), BinOp("*", node.left, dr))
    return BinOp("/", numerator, BinOp("*", node.right, node.right))


def derivative(node: Node, var: str) -> Node:
    """
    Symbolic partial derivative with respect to `var` ("y" or "t").

    Raises:
        NotDifferentiableError: the expression contains min/max
    """
    return simplify(_derive(node, var))


def _number(value: float) -> str:
    text = repr(float(value))
    return f"({text})" if value < 0 or text.startswith("-") else text


def serialize(node: Node) -> str:
    """Fully parenthesized text that parses back to an equal tree."""
    if isinstance(node, Const):
        return _number(node.value)
    if isinstance(node, Var):
        return node.name
    if isinstance(node, Neg):
        return f"(-{serialize(node.arg)})"
    if isinstance(node, Pow):
        return f"({serialize(node.base)} ^ {_number(node.exponent)})"
    if isinstance(node, Call):
        return f"{node.func}({serialize(node.arg)})"
    if isinstance(node, Clamp):
        return f"{node.func}({serialize(node.left)}, {serialize(node.right)})"
    return f"({serialize(node.left)} {node.op} {serialize(node.right)})"
