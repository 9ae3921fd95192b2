"""
RANKFLOW Expression Tree

Immutable AST nodes for rate and profile expressions in the variables y and t.
Nodes compare structurally, so two parses of equivalent text are equal.
"""

from dataclasses import dataclass
from typing import Union

VARIABLES = ("y", "t")
FUNCTIONS = ("exp", "log", "sin", "cos")
CLAMPS = ("min", "max")
BINARY_OPS = ("+", "-", "*", "/")


@dataclass(frozen=True)
class Const:
    value: float


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Neg:
    arg: "Node"


@dataclass(frozen=True)
class BinOp:
    op: str
    left: "Node"
    right: "Node"


@dataclass(frozen=True)
class Pow:
    """Power with a constant real exponent."""
    base: "Node"
    exponent: float


@dataclass(frozen=True)
class Call:
    func: str
    arg: "Node"


@dataclass(frozen=True)
class Clamp:
    """min/max of two operands, one of which is constant."""
    func: str
    left: "Node"
    right: "Node"


Node = Union[Const, Var, Neg, BinOp, Pow, Call, Clamp]


def children(node: Node) -> tuple[Node, ...]:
    if isinstance(node, (Neg, Call)):
        return (node.arg,)
    if isinstance(node, (BinOp, Clamp)):
        return (node.left, node.right)
    if isinstance(node, Pow):
        return (node.base,)
    return ()


def free_variables(node: Node) -> frozenset[str]:
    """Variables the expression actually mentions."""
    if isinstance(node, Var):
        return frozenset({node.name})
    found: frozenset[str] = frozenset()
    for child in children(node):
        found |= free_variables(child)
    return found


def contains_clamp(node: Node) -> bool:
    if isinstance(node, Clamp):
        return True
    return any(contains_clamp(child) for child in children(node))


def is_constant(node: Node) -> bool:
    return not free_variables(node)
