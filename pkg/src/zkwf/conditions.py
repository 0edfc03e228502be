"""Guard expression language for exclusive gateway branches.

Grammar (lowest precedence first):

    bool    -> conj ('or' conj)*
    conj    -> negation ('and' negation)*
    negation-> 'not' negation | comparison
    comparison -> sum (('=='|'!='|'<'|'<='|'>'|'>=') sum)?
    sum     -> term (('+'|'-') term)*
    term    -> factor ('*' factor)*
    factor  -> '-' factor | INT | IDENT | '(' bool ')'

A condition must be boolean at the top level.  Arithmetic is evaluated
over signed 64-bit integers with wrap-around.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Union

INT64_MIN = -(1 << 63)
INT64_MAX = (1 << 63) - 1
_MASK64 = (1 << 64) - 1


def wrap64(value: int) -> int:
    """Reduce an integer into the signed 64-bit domain (two's complement)."""
    return ((value + (1 << 63)) & _MASK64) - (1 << 63)


class ConditionError(ValueError):
    pass


class ConditionSyntaxError(ConditionError):
    def __init__(self, message: str, position: int):
        super().__init__(f"{message} (at offset {position})")
        self.position = position


class UnknownVariableError(ConditionError):
    def __init__(self, name: str):
        super().__init__(f"unknown variable {name!r}")
        self.name = name


@dataclass(frozen=True)
class Lit:
    value: int


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Arith:
    op: str  # add | sub | mul
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class Neg:
    inner: "Expr"


@dataclass(frozen=True)
class Compare:
    op: str  # eq | ne | lt | le | gt | ge
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class Logic:
    op: str  # and | or
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class Not:
    inner: "Expr"


Expr = Union[Lit, Var, Arith, Neg, Compare, Logic, Not]

_ARITH_NODES = (Lit, Var, Arith, Neg)
_BOOL_NODES = (Compare, Logic, Not)

_TOKEN_RE = re.compile(
    r"\s*(?:(?P<int>\d+)|(?P<ident>[A-Za-z_][A-Za-z0-9_]*)"
    r"|(?P<op>==|!=|<=|>=|<|>|\+|-|\*|\(|\)))"
)

_CMP_OPS = {"==": "eq", "!=": "ne", "<": "lt", "<=": "le", ">": "gt", ">=": "ge"}


def _tokenize(src: str) -> list[tuple[str, str, int]]:
    tokens = []
    pos = 0
    while pos < len(src):
        m = _TOKEN_RE.match(src, pos)
        if m is None:
            rest = src[pos:].strip()
            if not rest:
                break
            raise ConditionSyntaxError(f"unexpected character {rest[0]!r}", pos)
        if m.group("int") is not None:
            tokens.append(("int", m.group("int"), m.start("int")))
        elif m.group("ident") is not None:
            ident = m.group("ident")
            kind = "kw" if ident in ("and", "or", "not") else "ident"
            tokens.append((kind, ident, m.start("ident")))
        else:
            tokens.append(("op", m.group("op"), m.start("op")))
        pos = m.end()
    return tokens


class _Parser:
    def __init__(self, tokens: list[tuple[str, str, int]], source_len: int):
        self.tokens = tokens
        self.i = 0
        self.source_len = source_len

    def peek(self) -> tuple[str, str, int] | None:
        return self.tokens[self.i] if self.i < len(self.tokens) else None

    def next(self) -> tuple[str, str, int]:
        tok = self.peek()
        if tok is None:
            raise ConditionSyntaxError("unexpected end of expression", self.source_len)
        self.i += 1
        return tok

    def accept(self, kind: str, *values: str) -> str | None:
        tok = self.peek()
        if tok is not None and tok[0] == kind and (not values or tok[1] in values):
            self.i += 1
            return tok[1]
        return None

    def expect_op(self, value: str) -> None:
        tok = self.peek()
        if tok is None or tok[0] != "op" or tok[1] != value:
            pos = tok[2] if tok else self.source_len
            raise ConditionSyntaxError(f"expected {value!r}", pos)
        self.i += 1

    def parse_bool(self) -> Expr:
        node = self.parse_conj()
        while self.accept("kw", "or"):
            node = Logic("or", node, self.parse_conj())
        return node

    def parse_conj(self) -> Expr:
        node = self.parse_negation()
        while self.accept("kw", "and"):
            node = Logic("and", node, self.parse_negation())
        return node

    def parse_negation(self) -> Expr:
        if self.accept("kw", "not"):
            return Not(self.parse_negation())
        return self.parse_comparison()

    def parse_comparison(self) -> Expr:
        node = self.parse_sum()
        tok = self.peek()
        if tok is not None and tok[0] == "op" and tok[1] in _CMP_OPS:
            self.i += 1
            node = Compare(_CMP_OPS[tok[1]], node, self.parse_sum())
        return node

    def parse_sum(self) -> Expr:
        node = self.parse_term()
        while True:
            op = self.accept("op", "+", "-")
            if op is None:
                return node
            node = Arith("add" if op == "+" else "sub", node, self.parse_term())

    def parse_term(self) -> Expr:
        node = self.parse_factor()
        while self.accept("op", "*"):
            node = Arith("mul", node, self.parse_factor())
        return node

    def parse_factor(self) -> Expr:
        tok = self.next()
        kind, value, pos = tok
        if kind == "op" and value == "-":
            node = self.parse_factor()
            if isinstance(node, Lit):
                return Lit(-node.value)
            return Neg(node)
        if kind == "int":
            return Lit(int(value))
        if kind == "ident":
            return Var(value)
        if kind == "op" and value == "(":
            node = self.parse_bool()
            self.expect_op(")")
            return node
        raise ConditionSyntaxError(f"unexpected token {value!r}", pos)


def _check_types(node: Expr, var_names: frozenset[str], want_bool: bool) -> None:
    if want_bool:
        if isinstance(node, Logic):
            _check_types(node.left, var_names, True)
            _check_types(node.right, var_names, True)
            return
        if isinstance(node, Not):
            _check_types(node.inner, var_names, True)
            return
        if isinstance(node, Compare):
            _check_types(node.left, var_names, False)
            _check_types(node.right, var_names, False)
            return
        raise ConditionSyntaxError("expression is not boolean", 0)
    if isinstance(node, Lit):
        if not INT64_MIN <= node.value <= INT64_MAX:
            raise ConditionSyntaxError("integer literal out of 64-bit range", 0)
        return
    if isinstance(node, Var):
        if node.name not in var_names:
            raise UnknownVariableError(node.name)
        return
    if isinstance(node, Neg):
        _check_types(node.inner, var_names, False)
        return
    if isinstance(node, Arith):
        _check_types(node.left, var_names, False)
        _check_types(node.right, var_names, False)
        return
    raise ConditionSyntaxError("boolean value used in arithmetic", 0)


def compile_condition(source: str, var_names: frozenset[str] | set[str]) -> Expr:
    """Parse and type-check a guard expression against the declared variables."""
    parser = _Parser(_tokenize(source), len(source))
    node = parser.parse_bool()
    trailing = parser.peek()
    if trailing is not None:
        raise ConditionSyntaxError(f"trailing input {trailing[1]!r}", trailing[2])
    _check_types(node, frozenset(var_names), True)
    return node


def eval_condition(node: Expr, env: dict[str, int]) -> bool:
    result = _eval(node, env)
    assert isinstance(result, bool)
    return result


def _eval(node: Expr, env: dict[str, int]) -> int | bool:
    match node:
        case Lit(value):
            return value
        case Var(name):
            try:
                return env[name]
            except KeyError:
                raise UnknownVariableError(name) from None
        case Neg(inner):
            return wrap64(-_eval(inner, env))
        case Arith("add", left, right):
            return wrap64(_eval(left, env) + _eval(right, env))
        case Arith("sub", left, right):
            return wrap64(_eval(left, env) - _eval(right, env))
        case Arith("mul", left, right):
            return wrap64(_eval(left, env) * _eval(right, env))
        case Compare(op, left, right):
            a, b = _eval(left, env), _eval(right, env)
            return {
                "eq": a == b,
                "ne": a != b,
                "lt": a < b,
                "le": a <= b,
                "gt": a > b,
                "ge": a >= b,
            }[op]
        case Logic("and", left, right):
            return _eval(left, env) and _eval(right, env)
        case Logic("or", left, right):
            return _eval(left, env) or _eval(right, env)
        case Not(inner):
            return not _eval(inner, env)
    raise TypeError(f"not a condition node: {node!r}")


def negated(node: Expr) -> Expr:
    return Not(node)


def conjoin(parts: list[Expr]) -> Expr | None:
    """Combine guards collected along a gateway chain; None means unconditional."""
    if not parts:
        return None
    node = parts[0]
    for part in parts[1:]:
        node = Logic("and", node, part)
    return node


def to_jsonable(node: Expr) -> list:
    match node:
        case Lit(value):
            return ["lit", value]
        case Var(name):
            return ["var", name]
        case Neg(inner):
            return ["neg", to_jsonable(inner)]
        case Arith(op, left, right):
            return [op, to_jsonable(left), to_jsonable(right)]
        case Compare(op, left, right):
            return [op, to_jsonable(left), to_jsonable(right)]
        case Logic(op, left, right):
            return [op, to_jsonable(left), to_jsonable(right)]
        case Not(inner):
            return ["not", to_jsonable(inner)]
    raise TypeError(f"not a condition node: {node!r}")


def from_jsonable(data: list) -> Expr:
    tag = data[0]
    if tag == "lit":
        return Lit(int(data[1]))
    if tag == "var":
        return Var(str(data[1]))
    if tag == "neg":
        return Neg(from_jsonable(data[1]))
    if tag == "not":
        return Not(from_jsonable(data[1]))
    if tag in ("add", "sub", "mul"):
        return Arith(tag, from_jsonable(data[1]), from_jsonable(data[2]))
    if tag in _CMP_OPS.values():
        return Compare(tag, from_jsonable(data[1]), from_jsonable(data[2]))
    if tag in ("and", "or"):
        return Logic(tag, from_jsonable(data[1]), from_jsonable(data[2]))
    raise ValueError(f"unknown condition node tag {tag!r}")
