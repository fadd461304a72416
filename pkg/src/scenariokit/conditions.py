"""Event condition language: parser, printer and evaluator.

Conditions are small boolean/arithmetic expressions over state variables,
for example ``x_ego / v_ego >= -2.5 s && y_ped < 0``.  The concrete grammar
is documented in ``docs/grammar.ebnf``.

Trees are immutable and compare structurally, so ``parse(to_text(e)) == e``
holds for every well-typed tree produced by :func:`parse`.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from typing import Callable, Mapping, Union

__all__ = [
    "ConditionError",
    "ConditionSyntaxError",
    "ConditionTypeError",
    "UnboundVariable",
    "DivisionGuard",
    "Num",
    "Var",
    "Neg",
    "BinOp",
    "Abs",
    "Compare",
    "And",
    "Or",
    "Not",
    "Collision",
    "Linked",
    "ConditionExpr",
    "EvaluationContext",
    "parse",
    "to_text",
    "evaluate",
    "free_variables",
    "disjuncts",
    "DIV_EPS",
    "EQ_TOL",
    "UNITS",
]

DIV_EPS = 1e-9
EQ_TOL = 1e-9

# SI-style unit tokens accepted after numeric literals; longest first.
UNITS = (
    "m/s^2",
    "m/s²",
    "m/s2",
    "km/h",
    "m/s",
    "rad/s",
    "deg/s",
    "ms",
    "km",
    "kg",
    "rad",
    "deg",
    "Hz",
    "m",
    "s",
    "N",
)


class ConditionError(ValueError):
    """Base class for condition language errors."""


class ConditionSyntaxError(ConditionError):
    def __init__(self, message: str, position: int, expected: tuple[str, ...] = ()):
        self.position = position
        self.expected = expected
        detail = f" (expected one of: {', '.join(expected)})" if expected else ""
        super().__init__(f"{message} at position {position}{detail}")


class ConditionTypeError(ConditionError):
    def __init__(self, message: str, position: int | None = None):
        self.position = position
        where = f" at position {position}" if position is not None else ""
        super().__init__(f"{message}{where}")


class UnboundVariable(ConditionError):
    def __init__(self, name: str):
        self.name = name
        super().__init__(f"variable {name!r} is not bound")


class DivisionGuard(ConditionError):
    def __init__(self, divisor: float):
        self.divisor = divisor
        super().__init__(f"division by |{divisor!r}| < {DIV_EPS}")


# --- expression tree -------------------------------------------------------


@dataclass(frozen=True)
class Num:
    value: float
    unit: str | None = None


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Neg:
    operand: "Numeric"


@dataclass(frozen=True)
class BinOp:
    op: str  # one of + - * /
    left: "Numeric"
    right: "Numeric"


@dataclass(frozen=True)
class Abs:
    operand: "Numeric"


@dataclass(frozen=True)
class Compare:
    op: str  # one of < <= > >= ==
    left: "Numeric"
    right: "Numeric"


@dataclass(frozen=True)
class And:
    operands: tuple["ConditionExpr", ...]


@dataclass(frozen=True)
class Or:
    operands: tuple["ConditionExpr", ...]


@dataclass(frozen=True)
class Not:
    operand: "ConditionExpr"


@dataclass(frozen=True)
class Collision:
    first: str
    second: str


@dataclass(frozen=True)
class Linked:
    """Mode-transition trigger: the start or end of an activity."""

    activity: str
    boundary: str  # "start" or "end"


Numeric = Union[Num, Var, Neg, BinOp, Abs]
ConditionExpr = Union[Compare, And, Or, Not, Collision, Linked]

_NUMERIC = (Num, Var, Neg, BinOp, Abs)
_BOOLEAN = (Compare, And, Or, Not, Collision, Linked)


@dataclass(frozen=True)
class EvaluationContext:
    """Values for free variables plus oracles for the predicates."""

    variables: Mapping[str, float] = field(default_factory=dict)
    collision: Callable[[str, str], bool] | None = None
    linked: Callable[[str, str], bool] | None = None


# --- lexer -----------------------------------------------------------------

_NUMBER = re.compile(r"(?:\d+\.\d*|\.\d+|\d+)(?:[eE][+-]?\d+)?")
_IDENT = re.compile(r"[A-Za-z_][A-Za-z0-9_]*")
_STRING = re.compile(r'"((?:[^"\\]|\\.)*)"')
_UNIT = re.compile(
    "(?:" + "|".join(re.escape(u) for u in UNITS) + r")(?![A-Za-z0-9_²^])"
)
_OPERATORS = ("||", "&&", "<=", ">=", "==", "<", ">", "!", "+", "-", "*", "/", "(", ")", ",")
_KEYWORDS = {"AND": "&&", "OR": "||", "NOT": "!"}


@dataclass(frozen=True)
class _Token:
    kind: str  # num, ident, str, op, end
    text: str
    pos: int
    unit: str | None = None


def _tokenize(text: str) -> list[_Token]:
    tokens: list[_Token] = []
    i = 0
    n = len(text)
    while i < n:
        ch = text[i]
        if ch.isspace():
            i += 1
            continue
        m = _NUMBER.match(text, i)
        if m:
            j = m.end()
            k = j
            while k < n and text[k] in " \t":
                k += 1
            unit = None
            u = _UNIT.match(text, k)
            if u:
                unit = u.group(0)
                j = u.end()
            tokens.append(_Token("num", m.group(0), i, unit))
            i = j
            continue
        m = _IDENT.match(text, i)
        if m:
            word = m.group(0)
            if word in _KEYWORDS:
                tokens.append(_Token("op", _KEYWORDS[word], i))
            else:
                tokens.append(_Token("ident", word, i))
            i = m.end()
            continue
        m = _STRING.match(text, i)
        if m:
            tokens.append(_Token("str", re.sub(r"\\(.)", r"\1", m.group(1)), i))
            i = m.end()
            continue
        for op in _OPERATORS:
            if text.startswith(op, i):
                tokens.append(_Token("op", op, i))
                i += len(op)
                break
        else:
            raise ConditionSyntaxError(f"unexpected character {ch!r}", i)
    tokens.append(_Token("end", "", n))
    return tokens


# --- parser ----------------------------------------------------------------

_CMP_OPS = ("<=", ">=", "==", "<", ">")


class _Parser:
    def __init__(self, text: str):
        self.tokens = _tokenize(text)
        self.i = 0

    @property
    def tok(self) -> _Token:
        return self.tokens[self.i]

    def _next(self) -> _Token:
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def _accept(self, text: str) -> bool:
        if self.tok.kind == "op" and self.tok.text == text:
            self.i += 1
            return True
        return False

    def _expect(self, text: str) -> _Token:
        if self.tok.kind == "op" and self.tok.text == text:
            return self._next()
        raise self._error((text,))

    def _error(self, expected: tuple[str, ...]) -> ConditionSyntaxError:
        tok = self.tok
        what = "end of input" if tok.kind == "end" else repr(tok.text)
        return ConditionSyntaxError(f"unexpected {what}", tok.pos, expected)

    # or_expr := and_expr ("||" and_expr)*
    def or_expr(self):
        pos = self.tok.pos
        items = [self.and_expr()]
        while self._accept("||"):
            items.append(self.and_expr())
        if len(items) == 1:
            return items[0]
        return self._boolean(Or(tuple(items)), items, pos)

    def and_expr(self):
        pos = self.tok.pos
        items = [self.not_expr()]
        while self._accept("&&"):
            items.append(self.not_expr())
        if len(items) == 1:
            return items[0]
        return self._boolean(And(tuple(items)), items, pos)

    def not_expr(self):
        pos = self.tok.pos
        if self._accept("!"):
            operand = self.not_expr()
            return self._boolean(Not(operand), [operand], pos)
        return self.comparison()

    def comparison(self):
        pos = self.tok.pos
        left = self.sum()
        if self.tok.kind == "op" and self.tok.text in _CMP_OPS:
            op = self._next().text
            right = self.sum()
            for child in (left, right):
                if not isinstance(child, _NUMERIC):
                    raise ConditionTypeError(f"comparison {op!r} needs numeric operands", pos)
            return Compare(op, left, right)
        return left

    def sum(self):
        pos = self.tok.pos
        left = self.product()
        while self.tok.kind == "op" and self.tok.text in ("+", "-"):
            op = self._next().text
            right = self.product()
            left = self._arith(BinOp(op, left, right), pos)
        return left

    def product(self):
        pos = self.tok.pos
        left = self.unary()
        while self.tok.kind == "op" and self.tok.text in ("*", "/"):
            op = self._next().text
            right = self.unary()
            left = self._arith(BinOp(op, left, right), pos)
        return left

    def unary(self):
        pos = self.tok.pos
        if self._accept("-"):
            operand = self.unary()
            if isinstance(operand, Num):
                return Num(-operand.value, operand.unit)
            if not isinstance(operand, _NUMERIC):
                raise ConditionTypeError("unary '-' needs a numeric operand", pos)
            return Neg(operand)
        return self.primary()

    def primary(self):
        tok = self.tok
        if tok.kind == "num":
            self._next()
            return Num(float(tok.text), tok.unit)
        if tok.kind == "op" and tok.text == "(":
            self._next()
            inner = self.or_expr()
            self._expect(")")
            return inner
        if tok.kind == "ident":
            self._next()
            if tok.text in ("abs", "collision", "linked") and self.tok.text == "(":
                return self._call(tok)
            return Var(tok.text)
        raise self._error(("number", "identifier", "(", "-", "!"))

    def _call(self, name: _Token):
        self._expect("(")
        if name.text == "abs":
            operand = self.sum()
            if not isinstance(operand, _NUMERIC):
                raise ConditionTypeError("abs() needs a numeric argument", name.pos)
            self._expect(")")
            return Abs(operand)
        first = self._word()
        self._expect(",")
        second = self._word()
        self._expect(")")
        if name.text == "linked":
            if second not in ("start", "end"):
                raise ConditionSyntaxError(
                    "linked() boundary must be start or end", name.pos, ("start", "end")
                )
            return Linked(first, second)
        return Collision(first, second)

    def _word(self) -> str:
        if self.tok.kind in ("ident", "str"):
            return self._next().text
        raise self._error(("identifier", "string"))

    @staticmethod
    def _arith(node: BinOp, pos: int) -> BinOp:
        for child in (node.left, node.right):
            if not isinstance(child, _NUMERIC):
                raise ConditionTypeError(f"operator {node.op!r} needs numeric operands", pos)
        return node

    @staticmethod
    def _boolean(node, children, pos: int):
        for child in children:
            if not isinstance(child, _BOOLEAN):
                raise ConditionTypeError("boolean operator needs boolean operands", pos)
        return node


def parse(text: str) -> ConditionExpr:
    """Parse condition text into an expression tree.

    Raises :class:`ConditionSyntaxError` with the offending position, or
    :class:`ConditionTypeError` when the expression is not boolean at the root
    or mixes numeric and boolean operands.
    """
    parser = _Parser(text)
    expr = parser.or_expr()
    if parser.tok.kind != "end":
        raise parser._error(("||", "&&", "comparison operator", "end of input"))
    if not isinstance(expr, _BOOLEAN):
        raise ConditionTypeError("condition must be boolean", 0)
    return expr


# --- printer ---------------------------------------------------------------

_IDENT_FULL = re.compile(r"[A-Za-z_][A-Za-z0-9_]*\Z")


def _format_number(node: Num) -> str:
    v = node.value
    if v.is_integer() and abs(v) < 1e15:
        text = str(int(v))
        if v == 0 and math.copysign(1.0, v) < 0:
            text = "-0"
    else:
        text = repr(v)
    return f"{text} {node.unit}" if node.unit else text


def _word(text: str) -> str:
    if _IDENT_FULL.match(text) and text not in _KEYWORDS:
        return text
    return '"' + text.replace("\\", "\\\\").replace('"', '\\"') + '"'


# Binding strength: higher binds tighter.
_PREC = {"+": 5, "-": 5, "*": 6, "/": 6}


def _prec(node) -> int:
    if isinstance(node, Or):
        return 1
    if isinstance(node, And):
        return 2
    if isinstance(node, Not):
        return 3
    if isinstance(node, Compare):
        return 4
    if isinstance(node, BinOp):
        return _PREC[node.op]
    if isinstance(node, Neg):
        return 7
    if isinstance(node, Num) and math.copysign(1.0, node.value) < 0:
        return 7
    return 8


def _wrap(node, min_prec: int) -> str:
    text = to_text(node)
    return f"({text})" if _prec(node) < min_prec else text


def to_text(expr) -> str:
    """Canonical text of a tree, with the minimum of parentheses."""
    if isinstance(expr, Num):
        return _format_number(expr)
    if isinstance(expr, Var):
        return expr.name
    if isinstance(expr, Neg):
        return "-" + _wrap(expr.operand, 8)
    if isinstance(expr, Abs):
        return f"abs({to_text(expr.operand)})"
    if isinstance(expr, BinOp):
        p = _PREC[expr.op]
        # left-associative: an equal-precedence right child needs parentheses
        return f"{_wrap(expr.left, p)} {expr.op} {_wrap(expr.right, p + 1)}"
    if isinstance(expr, Compare):
        return f"{to_text(expr.left)} {expr.op} {to_text(expr.right)}"
    if isinstance(expr, Or):
        return " || ".join(_wrap(c, 2) for c in expr.operands)
    if isinstance(expr, And):
        return " && ".join(_wrap(c, 3) for c in expr.operands)
    if isinstance(expr, Not):
        inner = to_text(expr.operand)
        return f"!({inner})" if _prec(expr.operand) < 8 else f"!{inner}"
    if isinstance(expr, Collision):
        return f"collision({_word(expr.first)}, {_word(expr.second)})"
    if isinstance(expr, Linked):
        return f"linked({_word(expr.activity)}, {expr.boundary})"
    raise TypeError(f"not a condition node: {expr!r}")


# --- evaluation --------------------------------------------------------------


def _num(expr, env: EvaluationContext) -> float:
    if isinstance(expr, Num):
        return expr.value
    if isinstance(expr, Var):
        try:
            return env.variables[expr.name]
        except KeyError:
            raise UnboundVariable(expr.name) from None
    if isinstance(expr, Neg):
        return -_num(expr.operand, env)
    if isinstance(expr, Abs):
        return abs(_num(expr.operand, env))
    if isinstance(expr, BinOp):
        a = _num(expr.left, env)
        b = _num(expr.right, env)
        if expr.op == "+":
            return a + b
        if expr.op == "-":
            return a - b
        if expr.op == "*":
            return a * b
        if abs(b) < DIV_EPS:
            raise DivisionGuard(b)
        return a / b
    raise ConditionTypeError(f"expected a numeric node, got {type(expr).__name__}")


def evaluate(expr: ConditionExpr, env: EvaluationContext) -> bool:
    """Evaluate a condition; ``&&`` and ``||`` short-circuit left to right."""
    if isinstance(expr, Compare):
        a = _num(expr.left, env)
        b = _num(expr.right, env)
        op = expr.op
        if op == "<":
            return a < b
        if op == "<=":
            return a <= b
        if op == ">":
            return a > b
        if op == ">=":
            return a >= b
        return abs(a - b) <= EQ_TOL
    if isinstance(expr, And):
        return all(evaluate(c, env) for c in expr.operands)
    if isinstance(expr, Or):
        return any(evaluate(c, env) for c in expr.operands)
    if isinstance(expr, Not):
        return not evaluate(expr.operand, env)
    if isinstance(expr, Collision):
        if env.collision is None:
            raise ConditionError("no collision oracle supplied")
        return bool(env.collision(expr.first, expr.second))
    if isinstance(expr, Linked):
        if env.linked is None:
            raise ConditionError("no mode-transition oracle supplied")
        return bool(env.linked(expr.activity, expr.boundary))
    raise ConditionTypeError(f"expected a boolean node, got {type(expr).__name__}")


def free_variables(expr) -> frozenset[str]:
    """Variable names referenced by ``expr`` (predicate arguments excluded)."""
    if isinstance(expr, Var):
        return frozenset((expr.name,))
    if isinstance(expr, (Num, Collision, Linked)):
        return frozenset()
    if isinstance(expr, (Neg, Abs, Not)):
        return free_variables(expr.operand)
    if isinstance(expr, (BinOp, Compare)):
        return free_variables(expr.left) | free_variables(expr.right)
    if isinstance(expr, (And, Or)):
        out: frozenset[str] = frozenset()
        for c in expr.operands:
            out |= free_variables(c)
        return out
    raise TypeError(f"not a condition node: {expr!r}")


def disjuncts(expr: ConditionExpr) -> tuple[ConditionExpr, ...]:
    """Top-level alternatives of a condition (the condition itself if not an OR)."""
    if isinstance(expr, Or):
        return expr.operands
    return (expr,)


def iter_nodes(expr):
    """Pre-order traversal of every node in the tree."""
    yield expr
    if isinstance(expr, (Neg, Abs, Not)):
        yield from iter_nodes(expr.operand)
    elif isinstance(expr, (BinOp, Compare)):
        yield from iter_nodes(expr.left)
        yield from iter_nodes(expr.right)
    elif isinstance(expr, (And, Or)):
        for c in expr.operands:
            yield from iter_nodes(c)
