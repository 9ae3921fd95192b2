"""
RANKFLOW Expression Parser

Regex tokenizer and recursive-descent parser for the rate expression language.
Grammar (EBNF) is documented in docs/EXPRESSIONS.md:

    expr    = term { ("+" | "-") term } ;
    term    = unary { ("*" | "/") unary } ;
    unary   = ("-" | "+") unary | power ;
    power   = atom [ ("^" | "**") unary ] ;
    atom    = number | "y" | "t" | func "(" expr ")"
            | clamp "(" expr "," expr ")" | "(" expr ")" ;
    func    = "exp" | "log" | "sin" | "cos" ;
    clamp   = "min" | "max" ;
"""

import math
import re
from dataclasses import dataclass
from typing import Optional

from rankflow.errors import ExprSyntaxError, UnknownIdentifierError
from rankflow.ratelang.nodes import (
    CLAMPS,
    FUNCTIONS,
    VARIABLES,
    BinOp,
    Call,
    Clamp,
    Const,
    Neg,
    Node,
    Pow,
    Var,
    children,
    is_constant,
)
from rankflow.ratelang.calculus import fold_constant

_TOKEN_REGEXP = re.compile(
    r"(?P<number>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<ident>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>\*\*|[-+*/^(),])"
    r"|(?P<space>\s+)"
    r"|(?P<bad>.)"
)


@dataclass(frozen=True)
class Token:
    kind: str
    text: str
    offset: int


def tokenize(text: str) -> list[Token]:
    """Split text into tokens; offsets are byte offsets into the UTF-8 encoding."""
    tokens = []
    for match in _TOKEN_REGEXP.finditer(text):
        kind = match.lastgroup
        offset = len(text[: match.start()].encode("utf-8"))
        if kind == "space":
            continue
        if kind == "bad":
            raise ExprSyntaxError(f"Unexpected character {match.group()!r}", offset, text)
        tokens.append(Token(kind, match.group(), offset))
    tokens.append(Token("end", "", len(text.encode("utf-8"))))
    return tokens


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.tokens = tokenize(text)
        self.pos = 0
        self.clamp_offsets: dict[int, int] = {}

    @property
    def current(self) -> Token:
        return self.tokens[self.pos]

    def advance(self) -> Token:
        token = self.tokens[self.pos]
        self.pos += 1
        return token

    def accept(self, *ops: str) -> Optional[Token]:
        if self.current.kind == "op" and self.current.text in ops:
            return self.advance()
        return None

    def expect(self, op: str) -> Token:
        token = self.accept(op)
        if token is None:
            self.fail(f"Expected '{op}'")
        return token

    def fail(self, message: str, token: Optional[Token] = None):
        token = token or self.current
        found = "end of input" if token.kind == "end" else repr(token.text)
        raise ExprSyntaxError(f"{message}, found {found}", token.offset, self.text)

    def parse(self) -> Node:
        node = self.expr()
        if self.current.kind != "end":
            self.fail("Unexpected trailing input")
        return node

    def expr(self) -> Node:
        node = self.term()
        while (token := self.accept("+", "-")) is not None:
            node = BinOp(token.text, node, self.term())
        return node

    def term(self) -> Node:
        node = self.unary()
        while (token := self.accept("*", "/")) is not None:
            node = BinOp(token.text, node, self.unary())
        return node

    def unary(self) -> Node:
        if self.accept("-") is not None:
            return Neg(self.unary())
        if self.accept("+") is not None:
            return self.unary()
        return self.power()

    def power(self) -> Node:
        base = self.atom()
        if self.accept("^", "**") is None:
            return base
        start = self.current
        exponent = self.unary()
        if not is_constant(exponent):
            raise ExprSyntaxError("Exponent must be constant", start.offset, self.text)
        value = fold_constant(exponent)
        if value is None or not math.isfinite(value):
            raise ExprSyntaxError("Exponent is not a finite constant", start.offset, self.text)
        return Pow(base, value)

    def atom(self) -> Node:
        token = self.current
        if token.kind == "number":
            self.advance()
            value = float(token.text)
            if not math.isfinite(value):
                raise ExprSyntaxError("Number literal overflows", token.offset, self.text)
            return Const(value)
        if token.kind == "ident":
            self.advance()
            name = token.text
            if name in VARIABLES:
                return Var(name)
            if name in FUNCTIONS:
                self.expect("(")
                arg = self.expr()
                self.expect(")")
                return Call(name, arg)
            if name in CLAMPS:
                self.expect("(")
                left = self.expr()
                self.expect(",")
                right = self.expr()
                self.expect(")")
                if not (is_constant(left) or is_constant(right)):
                    raise ExprSyntaxError(
                        f"{name}() needs a constant operand", token.offset, self.text
                    )
                clamp = Clamp(name, left, right)
                self.clamp_offsets[id(clamp)] = token.offset
                return clamp
            raise UnknownIdentifierError(name, token.offset)
        if self.accept("(") is not None:
            node = self.expr()
            self.expect(")")
            return node
        self.fail("Expected a number, variable, function or '('")


def _check_clamp_placement(node: Node, top: bool, parser: _Parser) -> None:
    """min/max may only appear at the root, possibly nested in another root clamp."""
    if isinstance(node, Clamp):
        if not top:
            offset = parser.clamp_offsets.get(id(node), 0)
            raise ExprSyntaxError(
                f"{node.func}() is only allowed at top level", offset, parser.text
            )
        _check_clamp_placement(node.left, True, parser)
        _check_clamp_placement(node.right, True, parser)
        return
    for child in children(node):
        _check_clamp_placement(child, False, parser)


def parse_tree(text: str) -> Node:
    """
    Parse expression text into an AST.

    Raises:
        ExprSyntaxError: malformed input, with the byte offset of the fault
        UnknownIdentifierError: identifier outside the language
    """
    parser = _Parser(text)
    node = parser.parse()
    _check_clamp_placement(node, True, parser)
    return node
